"""Shared exception types."""

from __future__ import annotations


class GuardError(RuntimeError):
    """A resource guard tripped (covering too large, tuple count too large)."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""
