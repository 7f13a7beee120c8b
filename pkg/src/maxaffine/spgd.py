"""Sparse gradient descent for max-affine regression.

Each iteration assigns every sample to the cell of its maximizing affine
piece and updates every block from the same snapshot (no block sees
another's update within an iteration).  A block update has two stages:

1. Support selection: take one generalized-gradient step with the
   adaptive step size 1/pi_j (the reciprocal of the block's empirical
   cell mass) and keep the s largest-magnitude weight coordinates of the
   result, exactly as the hard-thresholding projection would.
2. Value refit: solve the block's least-squares problem over its own
   cell restricted to the selected coordinates plus the intercept.

The refit replaces the raw stepped values: a scalar step size cannot be
stable for every cell geometry (the within-cell second moment of
[x; 1] routinely has eigenvalues above 2, making the pure 1/pi_j
iteration locally repelling), while the restricted solve contracts fast
and keeps the sample complexity governed by the sparse selection stage.
Blocks whose cell is empty are left untouched.  Intercepts are never
thresholded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, MaxAffineParams
from .numerics import hard_threshold_vector, top_s_support


@dataclass(frozen=True)
class SpgdConfig:
    s: int
    max_iters: int = 500
    rel_tol: float = 1e-6
    trace_truth: MaxAffineParams | None = None

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be >= 0")  # 0 disables early stopping


@dataclass(frozen=True)
class SpgdReport:
    """Final estimate plus per-iterate traces.

    Traces have iters_run + 1 entries (the initial point included);
    dist_trace is None unless the config carried a reference truth.
    """

    final: MaxAffineParams
    iters_run: int
    loss_trace: np.ndarray
    pi_trace: np.ndarray
    dist_trace: np.ndarray | None
    converged: bool


def augment(X: np.ndarray) -> np.ndarray:
    """Append the constant-1 column: rows become xi_i = [x_i, 1]."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _cell_stats(Xi: np.ndarray, y: np.ndarray, Theta: np.ndarray):
    """Cells, cell masses, loss, and all block gradients at one iterate."""
    n, k = Xi.shape[0], Theta.shape[0]
    scores = Xi @ Theta.T
    cells = np.argmax(scores, axis=1)
    pi = np.bincount(cells, minlength=k) / n
    resid = scores[np.arange(n), cells] - y
    loss = 0.5 * float(resid @ resid) / n
    W = np.zeros((n, k))
    W[np.arange(n), cells] = resid
    grads = (W.T @ Xi) / n
    return cells, pi, loss, grads


def _project_blocks(Theta: np.ndarray, s: int) -> np.ndarray:
    """Hard-threshold the first d entries of each block; intercept exempt."""
    out = Theta.copy()
    for j in range(Theta.shape[0]):
        out[j, :-1] = hard_threshold_vector(Theta[j, :-1], s)
    return out


def _step_from_stats(
    Xi: np.ndarray,
    y: np.ndarray,
    Theta: np.ndarray,
    cells: np.ndarray,
    pi: np.ndarray,
    grads: np.ndarray,
    s: int,
):
    """One simultaneous update of all blocks from a shared snapshot."""
    d = Xi.shape[1] - 1
    new = Theta.copy()
    for j in range(Theta.shape[0]):
        if pi[j] > 0:
            alpha = Theta[j] - grads[j] / pi[j]
            keep = top_s_support(alpha[:d], s)
            cols = np.concatenate([keep, [d]])
            rows = cells == j
            sol, _, _, _ = np.linalg.lstsq(Xi[np.ix_(rows, cols)], y[rows], rcond=None)
            row = np.zeros(d + 1)
            row[cols] = sol
            new[j] = row
        # empty cell: block stays bitwise identical
    return new


def loss(params: MaxAffineParams, data: Dataset) -> float:
    """Half mean squared residual of the max-affine fit."""
    if params.d != data.d:
        raise ValueError(f"model dimension {params.d} != data dimension {data.d}")
    Xi = augment(data.X)
    scores = Xi @ params.block_matrix().T
    resid = np.max(scores, axis=1) - data.y
    return 0.5 * float(resid @ resid) / data.n


def block_gradient(params: MaxAffineParams, data: Dataset, j: int) -> np.ndarray:
    """Generalized gradient of the loss in block j (0-based), length d+1.

    Only samples in block j's cell contribute; an empty cell yields the
    zero vector.
    """
    if not 0 <= j < params.k:
        raise ValueError(f"block index {j} out of range [0, {params.k})")
    if params.d != data.d:
        raise ValueError(f"model dimension {params.d} != data dimension {data.d}")
    Xi = augment(data.X)
    _, _, _, grads = _cell_stats(Xi, data.y, params.block_matrix())
    return grads[j]


def spgd_step(params: MaxAffineParams, data: Dataset, s: int) -> MaxAffineParams:
    """One simultaneous Sp-GD update of all blocks."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if params.d != data.d:
        raise ValueError(f"model dimension {params.d} != data dimension {data.d}")
    Xi = augment(data.X)
    Theta = params.block_matrix()
    cells, pi, _, grads = _cell_stats(Xi, data.y, Theta)
    return MaxAffineParams.from_block_matrix(
        _step_from_stats(Xi, data.y, Theta, cells, pi, grads, s)
    )


def fit_spgd(init: MaxAffineParams, data: Dataset, cfg: SpgdConfig) -> SpgdReport:
    """Iterate Sp-GD until the relative iterate change drops below
    cfg.rel_tol or cfg.max_iters is reached."""
    if init.d != data.d:
        raise ValueError(f"init dimension {init.d} != data dimension {data.d}")
    Xi = augment(data.X)
    y = data.y
    truth_vec = None
    if cfg.trace_truth is not None:
        if cfg.trace_truth.k != init.k or cfg.trace_truth.d != init.d:
            raise ValueError("trace_truth shape does not match init")
        truth_vec = cfg.trace_truth.concat()

    Theta = _project_blocks(init.block_matrix(), cfg.s)
    loss_trace: list[float] = []
    pi_trace: list[np.ndarray] = []
    dist_trace: list[float] = []

    converged = False
    iters = 0
    for _ in range(cfg.max_iters):
        cells, pi, cur_loss, grads = _cell_stats(Xi, y, Theta)
        loss_trace.append(cur_loss)
        pi_trace.append(pi)
        if truth_vec is not None:
            dist_trace.append(float(np.linalg.norm(Theta.ravel() - truth_vec)))

        new = _step_from_stats(Xi, y, Theta, cells, pi, grads, cfg.s)
        delta = float(np.linalg.norm(new - Theta))
        denom = float(np.linalg.norm(Theta))
        Theta = new
        iters += 1
        # zero iterate: fall back to absolute change for the stop rule
        if (delta / denom if denom > 0 else delta) < cfg.rel_tol:
            converged = True
            break

    _, pi, final_loss, _ = _cell_stats(Xi, y, Theta)
    loss_trace.append(final_loss)
    pi_trace.append(pi)
    if truth_vec is not None:
        dist_trace.append(float(np.linalg.norm(Theta.ravel() - truth_vec)))

    return SpgdReport(
        final=MaxAffineParams.from_block_matrix(Theta),
        iters_run=iters,
        loss_trace=np.asarray(loss_trace),
        pi_trace=np.asarray(pi_trace),
        dist_trace=np.asarray(dist_trace) if truth_vec is not None else None,
        converged=converged,
    )
