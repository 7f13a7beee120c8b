"""Shared fixtures and hypothesis settings for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def planted(rng):
    """A small noiseless planted instance: (truth, data)."""
    from maxaffine import generate_dataset, generate_ground_truth

    truth = generate_ground_truth(d=12, s=4, k=3, rng=rng)
    data = generate_dataset(truth, 600, "gaussian", 0.0, rng)
    return truth, data
