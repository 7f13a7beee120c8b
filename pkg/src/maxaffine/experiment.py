"""Monte Carlo experiment engine: phase-transition grids and error sweeps.

An experiment is a grid of cells (axis coordinates) times a number of
seeded trials.  Each trial plants a ground truth, samples a dataset,
builds an initial estimate (a local perturbation of the truth or the
spectral + random-search pipeline), runs the sparse fit, and reports the
relative recovery error.  Aggregates per cell are the lower-median error
and the success rate at the recovery threshold; phase grids also get the
boundary curve n*(secondary) = smallest n whose success rate reaches 1/2.

Seeding: every trial index maps to one seed stream shared by all cells,
so a cell only influences a trial through its sizes and scales.  Larger-n
datasets therefore extend smaller ones sample-by-sample and candidate
streams are shared across the candidate-count axis (common random
numbers), which pairs the comparisons the grids are built to make and
keeps results identical across thread counts.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import (
    MaxAffineParams,
    generate_dataset,
    generate_ground_truth,
    pairwise_min_weight_distance,
    relative_error,
)
from .search import random_search_init
from .spectral import pca_baseline, span_projector, sparse_spectral_sweep, subspace_error
from .spgd import SpgdConfig, fit_spgd

SUCCESS_THRESHOLD = -2.5

KINDS = ("phase_nd", "phase_ns", "phase_nsigma", "subspace_sweep", "init_sweep")

# Axis layout per experiment kind; the last axis varies fastest in cell
# order, so phase grids list rows grouped by the secondary value with n
# increasing within each group.
KIND_AXES = {
    "phase_nd": ("d", "n"),
    "phase_ns": ("s", "n"),
    "phase_nsigma": ("sigma_sq", "n"),
    "subspace_sweep": ("n",),
    "init_sweep": ("candidates",),
}

# Scalar parameters each kind requires beyond its axes.
KIND_SCALARS = {
    "phase_nd": ("s", "k"),
    "phase_ns": ("d", "k"),
    "phase_nsigma": ("d", "s", "k"),
    "subspace_sweep": ("d", "s", "k"),
    "init_sweep": ("n", "d", "s", "k"),
}

# Extra per-trial measurements recorded by each kind, with the value to
# substitute when a trial fails.
KIND_EXTRAS = {
    "phase_nd": {"sqdist": math.inf},
    "phase_ns": {"sqdist": math.inf},
    "phase_nsigma": {"sqdist": math.inf},
    "subspace_sweep": {"err_pca": math.inf, "support_exact": 0.0},
    "init_sweep": {"err_pca": math.inf},
}

# How each extra aggregates into a grid column.
_EXTRA_COLUMNS = {
    "sqdist": "median_sqdist",
    "err_pca": "median_err_pca",
    "support_exact": "support_rate",
}

INIT_MODES = ("local", "spectral+random")


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid axes, fixed model parameters, and engine knobs."""

    kind: str
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    d: int | None = None
    s: int | None = None
    k: int | None = None
    n: int | None = None
    sigma_z: float = 0.0
    covariate_dist: str = "gaussian"
    trials: int = 50
    master_seed: int = 0
    init_mode: str = "local"
    local_scale: float = 0.05
    candidates: int = 16
    max_iters: int = 500
    rel_tol: float = 1e-6
    out: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        expected = KIND_AXES[self.kind]
        names = tuple(name for name, _ in self.axes)
        if names != expected:
            raise ConfigError(
                f"kind {self.kind!r} needs axes {expected}, got {names}"
            )
        for name, values in self.axes:
            if len(values) == 0:
                raise ConfigError(f"axis {name!r} is empty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"axis {name!r} must be strictly increasing")
            if name != "sigma_sq" and any(v != int(v) for v in values):
                raise ConfigError(f"axis {name!r} takes integer values")
            if any(v <= 0 for v in values):
                raise ConfigError(f"axis {name!r} values must be positive")
        for name in KIND_SCALARS[self.kind]:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"kind {self.kind!r} needs scalar {name!r}")
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.sigma_z < 0:
            raise ConfigError(f"sigma_z must be >= 0, got {self.sigma_z}")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(
                f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}"
            )
        if self.local_scale <= 0:
            raise ConfigError(f"local_scale must be > 0, got {self.local_scale}")
        if self.candidates < 1:
            raise ConfigError(f"candidates must be >= 1, got {self.candidates}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.rel_tol < 0:
            raise ConfigError(f"rel_tol must be >= 0, got {self.rel_tol}")

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.axes)

    def cells(self) -> list[tuple[float, ...]]:
        """All coordinate tuples in canonical (row-major) order."""
        return list(itertools.product(*(values for _, values in self.axes)))

    def cell_params(self, coords: tuple[float, ...]) -> dict[str, float]:
        """Merge fixed scalars with this cell's axis coordinates."""
        p: dict[str, float] = {
            "d": self.d,
            "s": self.s,
            "k": self.k,
            "n": self.n,
            "sigma_z": self.sigma_z,
            "candidates": self.candidates,
        }
        for (name, _), value in zip(self.axes, coords):
            if name == "sigma_sq":
                p["sigma_z"] = math.sqrt(value)
                p["sigma_sq"] = value
            else:
                p[name] = int(value)
        return p


@dataclass(frozen=True)
class CellResult:
    """Aggregated trial outcomes at one grid coordinate."""

    coords: tuple[float, ...]
    errs: np.ndarray
    extras: dict[str, np.ndarray]
    failures: int
    seconds: float

    @property
    def median_err(self) -> float:
        return lower_median(self.errs)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.errs <= SUCCESS_THRESHOLD))

    def extras_median(self, key: str) -> float:
        return lower_median(self.extras[key])

    def extras_mean(self, key: str) -> float:
        return float(np.mean(self.extras[key]))


@dataclass(frozen=True)
class ExperimentGrid:
    """All cell results of one experiment run, in canonical cell order."""

    config: ExperimentConfig
    cells: tuple[CellResult, ...] = field(default_factory=tuple)

    def boundary(self) -> list[tuple[float, float | None]]:
        """n*(secondary) = smallest n with success rate >= 1/2, per row.

        Only defined for the two-axis phase grids; a row that never
        reaches the threshold reports None.
        """
        if not self.config.kind.startswith("phase_"):
            raise ConfigError(f"kind {self.config.kind!r} has no phase boundary")
        secondary_name, _ = self.config.axis_names
        n_values = dict(self.config.axes)["n"]
        by_coords = {cell.coords: cell for cell in self.cells}
        out = []
        for sec in dict(self.config.axes)[secondary_name]:
            n_star = None
            for n in n_values:
                if by_coords[(sec, n)].success_rate >= 0.5:
                    n_star = n
                    break
            out.append((sec, n_star))
        return out


def lower_median(values: np.ndarray) -> float:
    """The lower middle value: no interpolation for even counts."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("empty sample")
    return float(arr[(arr.size - 1) // 2])


# ---------------------------------------------------------------------------
# Config file parsing: flat `key = value` lines, `#` comments,
# `start:stop:step` inclusive integer ranges and `[a,b,c]` explicit lists.
# ---------------------------------------------------------------------------

_SCALAR_KEYS = {
    "kind": str,
    "covariate_dist": str,
    "init_mode": str,
    "out": str,
    "sigma_z": float,
    "local_scale": float,
    "rel_tol": float,
    "trials": int,
    "master_seed": int,
    "max_iters": int,
    "d": int,
    "s": int,
    "k": int,
    "n": int,
    "candidates": int,
}
_AXIS_KEYS = ("n", "d", "s", "sigma_sq", "candidates")


def _parse_scalar(token: str) -> float | int | str:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def _parse_value(key: str, token: str) -> object:
    token = token.strip()
    if token.startswith("[") and token.endswith("]"):
        items = [t.strip() for t in token[1:-1].split(",") if t.strip()]
        if not items:
            raise ConfigError(f"empty list for {key!r}")
        values = [_parse_scalar(t) for t in items]
        if any(isinstance(v, str) for v in values):
            raise ConfigError(f"non-numeric list entry for {key!r}: {token}")
        return [float(v) for v in values]
    if ":" in token and key in _AXIS_KEYS:
        parts = token.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range for {key!r} must be start:stop:step, got {token}")
        try:
            start, stop, step = (int(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"range bounds for {key!r} must be integers: {token}") from exc
        if step <= 0:
            raise ConfigError(f"range step for {key!r} must be positive, got {step}")
        if stop < start:
            raise ConfigError(f"range for {key!r} is empty: {token}")
        return [float(v) for v in range(start, stop + 1, step)]
    return _parse_scalar(token)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key-value experiment description."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in _SCALAR_KEYS and key not in _AXIS_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        raw[key] = _parse_value(key, value)

    kind = raw.pop("kind", None)
    if kind is None:
        raise ConfigError("missing required key 'kind'")
    if not isinstance(kind, str) or kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    axes = []
    for name in KIND_AXES[kind]:
        if name not in raw:
            raise ConfigError(f"kind {kind!r} needs axis {name!r}")
        values = raw.pop(name)
        if not isinstance(values, list):
            raise ConfigError(f"axis {name!r} must be a list or range for kind {kind!r}")
        axes.append((name, tuple(values)))

    fields: dict[str, object] = {}
    for key, value in raw.items():
        if isinstance(value, list):
            raise ConfigError(f"{key!r} is not an axis of kind {kind!r}")
        if key == "sigma_sq":
            raise ConfigError("sigma_sq is only an axis of phase_nsigma grids")
        want = _SCALAR_KEYS[key]
        if want is int and isinstance(value, float) and value != int(value):
            raise ConfigError(f"{key!r} must be an integer, got {value}")
        if want is not str and isinstance(value, str):
            raise ConfigError(f"{key!r} must be numeric, got {value!r}")
        fields[key] = want(value)
    if kind == "phase_nsigma" and "sigma_z" in fields:
        raise ConfigError("phase_nsigma grids set noise through the sigma_sq axis")

    cfg = ExperimentConfig(kind=kind, axes=tuple(axes), **fields)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def _local_init(
    truth: MaxAffineParams, scale: float, rng: np.random.Generator
) -> MaxAffineParams:
    """Truth plus a random perturbation whose norm is scale * kappa."""
    if truth.k >= 2:
        base = pairwise_min_weight_distance(truth)
    else:
        base = float(np.linalg.norm(truth.block_matrix()))
    pert = rng.standard_normal((truth.k, truth.d + 1))
    pert *= scale * base / float(np.linalg.norm(pert))
    return MaxAffineParams.from_block_matrix(truth.block_matrix() + pert)


def _trial_body(
    cfg: ExperimentConfig, p: dict[str, float], trial: int
) -> dict[str, float]:
    ss = np.random.SeedSequence([cfg.master_seed, trial])
    truth_rng, data_rng, init_a, init_b = (
        np.random.default_rng(child) for child in ss.spawn(4)
    )
    d, s, k = int(p["d"]), int(p["s"]), int(p["k"])
    truth = generate_ground_truth(d=d, s=s, k=k, rng=truth_rng)
    data = generate_dataset(
        truth,
        n=int(p["n"]),
        covariate_dist=cfg.covariate_dist,
        sigma_z=float(p["sigma_z"]),
        rng=data_rng,
    )

    if cfg.kind == "subspace_sweep":
        reference = span_projector(truth)
        est = sparse_spectral_sweep(data, s=s, k=k, truth_projector=reference)
        err = subspace_error(est.factor, reference, support=est.support)
        err_pca = subspace_error(pca_baseline(data, k), reference)
        exact = float(np.array_equal(est.support, truth.joint_support()))
        return {"err": err, "err_pca": err_pca, "support_exact": exact}

    if cfg.kind == "init_sweep":
        m_count = int(p["candidates"])
        reference = span_projector(truth)
        est = sparse_spectral_sweep(data, s=s, k=k, truth_projector=reference)
        sparse_init = random_search_init(
            data, s, k, est.factor, est.support, m_count, init_a
        )
        dense_factor = pca_baseline(data, k)
        dense_init = random_search_init(
            data, s, k, dense_factor, np.arange(d), m_count, init_b
        )
        return {
            "err": relative_error(sparse_init, truth),
            "err_pca": relative_error(dense_init, truth),
        }

    # Phase grids: initialize, fit, report recovery error.
    if cfg.init_mode == "local":
        init = _local_init(truth, cfg.local_scale, init_a)
    else:
        reference = span_projector(truth)
        est = sparse_spectral_sweep(data, s=s, k=k, truth_projector=reference)
        init = random_search_init(
            data, s, k, est.factor, est.support, cfg.candidates, init_a
        )
    report = fit_spgd(
        init, data, SpgdConfig(s=s, max_iters=cfg.max_iters, rel_tol=cfg.rel_tol)
    )
    err = relative_error(report.final, truth)
    truth_sq = float(np.sum(truth.block_matrix() ** 2))
    return {"err": err, "sqdist": (10.0**err) * truth_sq}


def _trial_record(
    cfg: ExperimentConfig, coords: tuple[float, ...], trial: int
) -> dict[str, float]:
    """One trial, never raising: failures record +inf error and a flag."""
    start = time.perf_counter()
    try:
        record = _trial_body(cfg, cfg.cell_params(coords), trial)
        record["failed"] = 0.0
        if not math.isfinite(record["err"]):
            record["err"] = math.inf
            record["failed"] = 1.0
    except Exception:
        record = {"err": math.inf, "failed": 1.0}
    for key, default in KIND_EXTRAS[cfg.kind].items():
        record.setdefault(key, default)
    record["seconds"] = time.perf_counter() - start
    return record


def run_trial(
    cfg: ExperimentConfig, coords: tuple[float, ...], trial: int
) -> float:
    """The recovery (or subspace) error of one seeded trial."""
    return _trial_record(cfg, coords, trial)["err"]


def _pool_entry(args: tuple[ExperimentConfig, tuple[float, ...], int]) -> dict[str, float]:
    cfg, coords, trial = args
    return _trial_record(cfg, coords, trial)


# ---------------------------------------------------------------------------
# Grid execution and artifact emission
# ---------------------------------------------------------------------------


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1, svg: bool = False
) -> ExperimentGrid:
    """Run all cells x trials, aggregate, and emit artifacts to cfg.out.

    Results are identical for any thread count: trials are seeded by
    coordinate-independent streams and aggregation order is fixed.  With
    an output directory set, writability is checked before any trial
    runs; grid.csv (and boundary.csv for phase grids) are deterministic,
    timings.csv is not and lives apart for that reason.
    """
    cfg.validate()
    out_dir: Path | None = None
    if cfg.out is not None:
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / "grid.csv"
        probe.write_text("")  # fail on unwritable paths before computing
    if svg and len(cfg.axes) != 2:
        raise ConfigError(
            "SVG heatmaps need a two-axis grid; use the line-plot mode of the "
            "CSV output for one-axis sweeps"
        )

    cells = cfg.cells()
    tasks = [(cfg, coords, trial) for coords in cells for trial in range(cfg.trials)]
    if threads <= 1:
        records = [_pool_entry(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, len(tasks) // (threads * 4))
            records = list(pool.map(_pool_entry, tasks, chunksize=chunk))

    results = []
    extra_keys = tuple(KIND_EXTRAS[cfg.kind])
    for index, coords in enumerate(cells):
        batch = records[index * cfg.trials : (index + 1) * cfg.trials]
        errs = np.array([rec["err"] for rec in batch])
        extras = {
            key: np.array([rec[key] for rec in batch]) for key in extra_keys
        }
        results.append(
            CellResult(
                coords=coords,
                errs=errs,
                extras=extras,
                failures=int(sum(rec["failed"] for rec in batch)),
                seconds=float(sum(rec["seconds"] for rec in batch)),
            )
        )
    grid = ExperimentGrid(config=cfg, cells=tuple(results))

    if out_dir is not None:
        write_grid_csv(grid, out_dir / "grid.csv")
        if cfg.kind.startswith("phase_"):
            write_boundary_csv(grid, out_dir / "boundary.csv")
        write_timings_csv(grid, out_dir / "timings.csv")
        if svg:
            from .svg import render_heatmap

            (out_dir / "heatmap.svg").write_text(render_heatmap(grid))
    return grid


def _fmt(value: float) -> str:
    if isinstance(value, (int, np.integer)) or (
        isinstance(value, float) and value.is_integer() and abs(value) < 1e15
    ):
        return str(int(value))
    return "%.17g" % value


def _aggregate(cell: CellResult, key: str) -> float:
    if key == "support_exact":
        return cell.extras_mean(key)
    return cell.extras_median(key)


def grid_csv_lines(grid: ExperimentGrid) -> list[str]:
    cfg = grid.config
    extra_cols = [_EXTRA_COLUMNS[key] for key in KIND_EXTRAS[cfg.kind]]
    lines = [
        "# median convention: lower (even trial counts report the lower middle value)",
        ",".join(
            list(cfg.axis_names)
            + ["median_err", "success_rate", "trials", "failures"]
            + extra_cols
        ),
    ]
    for cell in grid.cells:
        row = [_fmt(c) for c in cell.coords]
        row += [
            "%.17g" % cell.median_err,
            "%.17g" % cell.success_rate,
            str(cfg.trials),
            str(cell.failures),
        ]
        row += ["%.17g" % _aggregate(cell, key) for key in KIND_EXTRAS[cfg.kind]]
        lines.append(",".join(row))
    return lines


def write_grid_csv(grid: ExperimentGrid, path: str | Path) -> None:
    Path(path).write_text("\n".join(grid_csv_lines(grid)) + "\n")


def write_boundary_csv(grid: ExperimentGrid, path: str | Path) -> None:
    secondary = grid.config.axis_names[0]
    lines = [
        "# n_star: smallest n on the grid with success_rate >= 0.5 (blank if never)",
        f"{secondary},n_star",
    ]
    for sec, n_star in grid.boundary():
        lines.append(f"{_fmt(sec)},{'' if n_star is None else _fmt(n_star)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_timings_csv(grid: ExperimentGrid, path: str | Path) -> None:
    lines = [
        "# wall-clock seconds per cell (sum over trials); not byte-reproducible",
        ",".join(list(grid.config.axis_names) + ["seconds"]),
    ]
    for cell in grid.cells:
        lines.append(
            ",".join([_fmt(c) for c in cell.coords] + ["%.3f" % cell.seconds])
        )
    Path(path).write_text("\n".join(lines) + "\n")
