"""CSV serialization for datasets and model parameters.

Datasets are stored as `x1,...,xd,y` with an optional key-value sidecar
(`<path>.meta`) recording how they were generated.  Parameters are stored
one block per row as `a1,...,ad,b`.  Floats are written with %.17g so
round trips are exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import Dataset, DatasetMeta, MaxAffineParams

_FLOAT_FMT = "%.17g"


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_dataset(
    path: str | Path,
    data: Dataset,
    extra_meta: dict[str, object] | None = None,
) -> None:
    """Write the CSV and, when metadata is known, the sidecar next to it."""
    path = Path(path)
    d = data.d
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["y"])
    table = np.hstack([data.X, data.y[:, None]])
    np.savetxt(path, table, fmt=_FLOAT_FMT, delimiter=",", header=header, comments="")
    meta: dict[str, object] = {}
    if data.meta is not None:
        meta.update(
            seed=data.meta.seed,
            dist=data.meta.covariate_dist,
            sigma_z=_FLOAT_FMT % data.meta.sigma_z,
            d=d,
        )
    if extra_meta:
        meta.update(extra_meta)
    if meta:
        lines = [f"{key} = {value}" for key, value in meta.items()]
        sidecar_path(path).write_text("\n".join(lines) + "\n")


def read_sidecar(path: str | Path) -> dict[str, str]:
    """Parse a key-value sidecar; returns {} when the file is absent."""
    side = sidecar_path(path)
    if not side.exists():
        return {}
    meta = {}
    for line in side.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return meta


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] < 2:
        raise ValueError(f"{path}: expected at least one covariate column plus y")
    side = read_sidecar(path)
    meta = None
    if side:
        meta = DatasetMeta(
            covariate_dist=side.get("dist", "gaussian"),
            sigma_z=float(side.get("sigma_z", 0.0)),
            seed=int(side.get("seed", -1)),
        )
    return Dataset(X=table[:, :-1], y=table[:, -1], meta=meta)


def write_params(path: str | Path, params: MaxAffineParams) -> None:
    d = params.d
    header = ",".join([f"a{i + 1}" for i in range(d)] + ["b"])
    np.savetxt(
        path,
        params.block_matrix(),
        fmt=_FLOAT_FMT,
        delimiter=",",
        header=header,
        comments="",
    )


def read_params(path: str | Path) -> MaxAffineParams:
    blocks = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return MaxAffineParams.from_block_matrix(blocks)
