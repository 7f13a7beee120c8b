"""Initialization search over an estimated sparse subspace.

Candidates for the k blocks live in the estimated k-dimensional subspace
restricted to the estimated support: a block is [a_j]_S = V w_j plus an
intercept b_j, with a single nonnegative scale c fitted in closed form.
Two searches are provided: exhaustive enumeration of an r-covering of
the unit ball in R^{k+1} (deterministic, exponential in k), and a
best-of-M random draw with a short gradient refinement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import GuardError
from .model import Dataset, MaxAffineParams
from .spgd import SpgdConfig, fit_spgd, loss

MAX_COVERING_POINTS = 10**6
MAX_TUPLES = 10**7
RANDOM_REFINE_ITERS = 10


@dataclass(frozen=True)
class Covering:
    """Finite subset of the closed unit ball in R^{k+1} with radius <= r."""

    points: np.ndarray  # (count, k+1), every row with ||row|| <= 1
    r: float
    h: float

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class InitCandidate:
    """A scored search candidate, both in subspace coordinates and lifted."""

    subspace_coords: np.ndarray  # (k, k+1) rows [w_j, b_j]
    scale: float
    lifted: MaxAffineParams
    fit_error: float  # mean squared residual of the scaled candidate


def build_covering(k: int, r: float) -> Covering:
    """Axis-aligned grid covering of the unit ball in R^{k+1}.

    Grid spacing h = 2r/sqrt(k+1) puts every ball point within r of a
    grid point; points are kept within radius 1 + r and then radially
    clipped into the ball, which cannot push them farther than r from
    any target inside the ball.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if r <= 0:
        raise ValueError("r must be > 0")
    dim = k + 1
    h = 2.0 * r / math.sqrt(dim)
    radius = 1.0 + r
    per_axis = 2 * math.floor(radius / h) + 1
    if per_axis**dim > MAX_COVERING_POINTS:
        raise GuardError(
            f"covering grid would have {per_axis}^{dim} > {MAX_COVERING_POINTS} "
            f"points (k={k}, r={r}); increase r"
        )
    axis = h * np.arange(-(per_axis // 2), per_axis // 2 + 1)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1)
    pts = grid.reshape(-1, dim)
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms <= radius]
    norms = np.linalg.norm(pts, axis=1)
    pts = pts / np.maximum(norms, 1.0)[:, None]
    return Covering(points=pts, r=float(r), h=h)


def optimal_scale(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Nonnegative least-squares scale: max(<y, y_hat>/||y_hat||^2, 0)."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    den = float(y_hat @ y_hat)
    if den == 0.0:
        return 0.0
    return max(float(y @ y_hat) / den, 0.0)


def lift_candidate(
    coords: np.ndarray, scale: float, factor: np.ndarray, support: np.ndarray, d: int
) -> MaxAffineParams:
    """Map subspace coordinates [w_j, b_j] to d-dimensional block parameters.

    Weights are c * V w_j placed on the support (zero elsewhere);
    intercepts are c * b_j.
    """
    coords = np.asarray(coords, dtype=float)
    k = coords.shape[0]
    weights = np.zeros((k, d))
    weights[:, support] = scale * (coords[:, :-1] @ factor.T)
    intercepts = scale * coords[:, -1]
    return MaxAffineParams(weights=weights, intercepts=intercepts)


def covering_search(
    data: Dataset,
    k: int,
    factor: np.ndarray,
    support: np.ndarray,
    r: float,
) -> InitCandidate:
    """Exhaustive search over all k-tuples (with repetition) from a covering.

    Each covering point is one affine piece in subspace coordinates; each
    tuple is scored by its best-scale mean squared fit, and the minimizer
    (ties to the lowest tuple index in lexicographic order) is lifted.
    """
    factor = np.asarray(factor, dtype=float)
    support = np.asarray(support, dtype=int)
    if factor.shape != (support.size, k):
        raise ValueError(
            f"factor must be ({support.size}, {k}), got {factor.shape}"
        )
    cov = build_covering(k, r)
    m = cov.count
    if m**k > MAX_TUPLES:
        raise GuardError(
            f"{m}^{k} tuples exceed the {MAX_TUPLES} guard; "
            "increase r or use random_search_init"
        )
    X_S = data.X[:, support]
    y = data.y
    n = data.n
    # one affine piece per covering point, evaluated on all samples
    G = X_S @ (factor @ cov.points[:, :-1].T) + cov.points[:, -1]
    yy = float(y @ y)

    best_err = math.inf
    best_tuple: tuple[int, ...] | None = None
    best_scale = 0.0
    chunk = max(1, int(2**22 // (n * k)))
    it = itertools.product(range(m), repeat=k)
    while True:
        tuples = np.array(list(itertools.islice(it, chunk)), dtype=int)
        if tuples.size == 0:
            break
        Yhat = np.max(G[:, tuples], axis=2)  # (n, chunk)
        num = y @ Yhat
        den = np.einsum("ij,ij->j", Yhat, Yhat)
        safe_den = np.where(den > 0, den, 1.0)
        c = np.where(den > 0, np.maximum(num / safe_den, 0.0), 0.0)
        errs = (yy - 2.0 * c * num + c**2 * den) / n
        i = int(np.argmin(errs))
        if errs[i] < best_err:
            best_err = float(errs[i])
            best_tuple = tuple(int(t) for t in tuples[i])
            best_scale = float(c[i])
    assert best_tuple is not None
    coords = cov.points[list(best_tuple)]
    lifted = lift_candidate(coords, best_scale, factor, support, data.d)
    return InitCandidate(
        subspace_coords=coords,
        scale=best_scale,
        lifted=lifted,
        fit_error=best_err,
    )


def candidate_fit_error(data: Dataset, candidate: InitCandidate) -> float:
    """Mean squared residual of a candidate's lifted model (re-scan oracle)."""
    Xi = np.hstack([data.X, np.ones((data.n, 1))])
    y_hat = np.max(Xi @ candidate.lifted.block_matrix().T, axis=1)
    resid = y_hat - data.y
    return float(resid @ resid) / data.n


def draw_random_candidate(
    data: Dataset,
    k: int,
    factor: np.ndarray,
    support: np.ndarray,
    rng: np.random.Generator,
) -> MaxAffineParams:
    """One random subspace candidate: a_j on S from V g_j, then scaled."""
    G = rng.standard_normal((k, factor.shape[1]))
    b = rng.standard_normal(k)
    coords = np.hstack([G, b[:, None]])
    unscaled = lift_candidate(coords, 1.0, factor, support, data.d)
    Xi = np.hstack([data.X, np.ones((data.n, 1))])
    y_hat = np.max(Xi @ unscaled.block_matrix().T, axis=1)
    c = optimal_scale(data.y, y_hat)
    return MaxAffineParams(weights=c * unscaled.weights, intercepts=c * unscaled.intercepts)


def random_search_init(
    data: Dataset,
    s: int,
    k: int,
    factor: np.ndarray,
    support: np.ndarray,
    M: int,
    rng: np.random.Generator,
    refine_iters: int = RANDOM_REFINE_ITERS,
) -> MaxAffineParams:
    """Best of M random subspace candidates after a short refinement.

    Candidates are drawn sequentially from the one stream, so the first
    M' < M candidates of a larger run coincide with a smaller run's.
    Each is refined with exactly refine_iters Sp-GD iterations and the
    smallest post-refinement loss wins (ties to the earliest draw).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    cfg = SpgdConfig(s=s, max_iters=refine_iters, rel_tol=0.0)
    best: MaxAffineParams | None = None
    best_loss = math.inf
    for _ in range(M):
        cand = draw_random_candidate(data, k, factor, support, rng)
        report = fit_spgd(cand, data, cfg)
        final_loss = float(report.loss_trace[-1])
        if final_loss < best_loss:
            best_loss = final_loss
            best = report.final
    assert best is not None
    return best
