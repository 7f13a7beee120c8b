#!/usr/bin/env python3
"""Run the three phase-transition grids and print their boundary tables.

Each study sweeps the sample size n against one other quantity (total
dimension d, sparsity s, or noise variance sigma^2) and reports the
smallest n where at least half the Monte Carlo trials recover the
ground-truth parameters (relative error <= -2.5 in log10).  Artifacts
(grid.csv, boundary.csv, timings.csv, optional heatmap.svg) land in one
directory per study under --out-root.

The desk presets replay in about a minute serially; the paper-scale
presets take hours and are sized for overnight runs (use --threads).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from pathlib import Path

from maxaffine import ExperimentGrid, load_config, run_experiment

REPO_ROOT = Path(__file__).resolve().parent.parent
STUDIES = ("nd", "ns", "nsigma")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out-root",
        type=Path,
        default=REPO_ROOT / "results" / "phase",
        help="parent directory for per-study artifact directories",
    )
    parser.add_argument(
        "--paper-scale",
        action="store_true",
        help="use the publication-scale presets instead of the desk ones",
    )
    parser.add_argument(
        "--only",
        choices=STUDIES,
        action="append",
        help="run a subset of the studies (repeatable; default: all)",
    )
    parser.add_argument(
        "--threads", type=int, default=1, help="worker processes per grid"
    )
    parser.add_argument(
        "--svg", action="store_true", help="also render heatmap.svg per grid"
    )
    parser.add_argument(
        "--master-seed",
        type=int,
        default=None,
        help="override the preset's master seed",
    )
    return parser.parse_args(argv)


def boundary_table(grid: ExperimentGrid) -> list[str]:
    secondary = grid.config.axis_names[0]
    lines = [f"  {secondary:>8s}  {'n*':>6s}  note"]
    for sec, n_star in grid.boundary():
        if n_star is None:
            note = "no majority success on this n range"
            shown = "-"
        else:
            note = ""
            shown = str(int(n_star))
        lines.append(f"  {sec:8g}  {shown:>6s}  {note}")
    return lines


def scaling_note(grid: ExperimentGrid) -> str:
    """One-line check of the expected boundary growth law."""
    cfg = grid.config
    boundary = {sec: n for sec, n in grid.boundary() if n is not None}
    if len(boundary) < 2:
        return "boundary resolved on too few rows to test a growth law"
    if cfg.kind == "phase_nd":
        lo, hi = min(boundary), max(boundary)
        return (
            f"n* grows {boundary[hi] / boundary[lo]:.2f}x while d grows "
            f"{hi / lo:.0f}x (logarithmic growth keeps this ratio small)"
        )
    if cfg.kind == "phase_ns":
        d = cfg.d
        ratios = [n / (s * math.log(d / s)) for s, n in boundary.items()]
        return (
            "n*/(s log(d/s)) = "
            + ", ".join(f"{r:.2f}" for r in ratios)
            + f" (spread {max(ratios) / min(ratios):.2f}x)"
        )
    noisy = {sig: n for sig, n in boundary.items() if sig >= 1}
    if len(noisy) < 2:
        return "need two boundaries with sigma^2 >= 1 to test proportionality"
    lo, hi = min(noisy), max(noisy)
    return (
        f"n* grows {noisy[hi] / noisy[lo]:.2f}x while sigma^2 grows "
        f"{hi / lo:.1f}x (proportional once sigma^2 >= 1)"
    )


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    suffix = "paper" if args.paper_scale else "desk"
    chosen = tuple(dict.fromkeys(args.only)) if args.only else STUDIES

    for study in chosen:
        cfg_path = REPO_ROOT / "configs" / f"phase_{study}_{suffix}.cfg"
        out_dir = args.out_root / f"phase_{study}"
        cfg = load_config(cfg_path)
        cfg = dataclasses.replace(cfg, out=str(out_dir))
        if args.master_seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.master_seed)

        print("=" * 72)
        print(f"phase_{study}: {cfg_path.name} -> {out_dir}")
        total = len(cfg.cells()) * cfg.trials
        print(f"  {len(cfg.cells())} cells x {cfg.trials} trials = {total} fits")
        start = time.perf_counter()
        grid = run_experiment(cfg, threads=args.threads, svg=args.svg)
        elapsed = time.perf_counter() - start
        print(f"  done in {elapsed:.1f}s")
        print("\n".join(boundary_table(grid)))
        print(f"  {scaling_note(grid)}")
    print("=" * 72)
    return 0


if __name__ == "__main__":
    sys.exit(main())
