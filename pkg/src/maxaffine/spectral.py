"""Spectral subspace estimation for jointly sparse max-affine models.

The target-weighted first and second moments of the data form a matrix
whose column space matches the span of the true weight vectors.  A
Fantope-constrained, l1-penalized semidefinite relaxation (solved by
ADMM) sharpens that estimate under joint sparsity; thresholding its
diagonal recovers the support, and the top-k eigenvectors of the
restricted matrix give the subspace factor.  A plain-PCA pathway is kept
as the non-sparse baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, MaxAffineParams
from .numerics import fantope_project, soft_threshold, sym_eig, top_k_factor

DEFAULT_LAMBDA_FRACTIONS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)

ADMM_RHO = 1.0
ADMM_TOL = 1e-5
ADMM_MAX_ITERS = 1000


@dataclass(frozen=True)
class MomentMatrix:
    """Target-weighted moments: m1, M2, and M = m1 m1^T + M2."""

    m1: np.ndarray
    M2: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class AdmmResult:
    solution: np.ndarray  # the soft-thresholded (sparse) iterate
    iters: int
    primal_residual: float
    dual_residual: float
    converged: bool
    scaled_dual: np.ndarray | None = None  # U, for warm-starting nearby solves


@dataclass(frozen=True)
class SubspaceEstimate:
    """Support, orthonormal factor, and the relaxed SDP solution."""

    support: np.ndarray
    factor: np.ndarray
    relaxed: np.ndarray
    admm_iters: int
    admm_residual: float
    lam: float


def weighted_moments(data: Dataset) -> MomentMatrix:
    """m1 = mean(y_i x_i), M2 = mean(y_i (x_i x_i^T - I)), M = m1 m1^T + M2.

    Sums are normalized by n so the scale of M (and hence of the l1
    penalty) does not grow with the sample size.
    """
    X, y = data.X, data.y
    n = data.n
    m1 = (X.T @ y) / n
    E = ((X * y[:, None]).T @ X) / n
    M2 = 0.5 * (E + E.T) - float(y.mean()) * np.eye(data.d)
    M = np.outer(m1, m1) + M2
    M = 0.5 * (M + M.T)
    return MomentMatrix(m1=m1, M2=M2, M=M)


def residualized_moments(data: Dataset) -> MomentMatrix:
    """Variance-reduced moments: residualize y against its best affine fit.

    The affine part of y contributes nothing to the population M2 (odd
    covariate moments vanish for the symmetric covariate laws used here)
    and its least-squares slope is itself an estimate of m1 = E[y x] with
    the affine component's variance removed.  Replacing y by its OLS
    residual in the M2 average therefore targets the same population
    matrix as `weighted_moments` while shrinking the sampling noise by
    the (typically large) share of Var(y) explained by the affine part.
    Requires n > d + 1 to be meaningful; falls back to the plain moments
    otherwise.
    """
    X, y = data.X, data.y
    n, d = X.shape
    if n <= d + 1:
        return weighted_moments(data)
    Xa = np.hstack([X, np.ones((n, 1))])
    coef, _, _, _ = np.linalg.lstsq(Xa, y, rcond=None)
    r = y - Xa @ coef
    m1 = coef[:d]
    M2 = ((X * r[:, None]).T @ X) / n - float(r.mean()) * np.eye(d)
    M2 = 0.5 * (M2 + M2.T)
    M = np.outer(m1, m1) + M2
    M = 0.5 * (M + M.T)
    return MomentMatrix(m1=m1, M2=M2, M=M)


def fantope_admm(
    M: np.ndarray,
    k: int,
    lam: float,
    rho_admm: float = ADMM_RHO,
    tol: float = ADMM_TOL,
    max_iters: int = ADMM_MAX_ITERS,
    warm: tuple[np.ndarray, np.ndarray] | None = None,
) -> AdmmResult:
    """ADMM for max tr(M^T P) - lam * sum|P_ij| over the trace-k Fantope.

    Splitting P = Y: the P update projects onto the Fantope, the Y update
    soft-thresholds, and the scaled dual U accumulates the gap.  Stops
    when both the primal residual ||P - Y||_F and the dual residual
    rho * ||Y - Y_prev||_F fall below tol * sqrt(d).  The sparse iterate Y
    is returned; its exact zeros make diagonal thresholding meaningful.
    Hitting max_iters is reported through the converged flag, not raised.
    `warm` optionally seeds (Y, U) from a nearby solve (e.g. the previous
    point of a lambda sweep); cold start is all zeros.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("moment matrix contains non-finite entries")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if rho_admm <= 0:
        raise ValueError("rho_admm must be > 0")
    d = M.shape[0]
    if warm is None:
        Y = np.zeros((d, d))
        U = np.zeros((d, d))
    else:
        Y = warm[0].copy()
        U = warm[1].copy()
    step = M / rho_admm
    thresh = lam / rho_admm
    bound = tol * math.sqrt(d)
    primal = dual = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        P = fantope_project(Y - U + step, k)
        Y_prev = Y
        Y = soft_threshold(P + U, thresh)
        U = U + P - Y
        primal = float(np.linalg.norm(P - Y))
        dual = rho_admm * float(np.linalg.norm(Y - Y_prev))
        if max(primal, dual) <= bound:
            return AdmmResult(Y, it, primal, dual, True, U)
    return AdmmResult(Y, it, primal, dual, False, U)


def recover_support(P_hat: np.ndarray, s: int) -> np.ndarray:
    """Sorted indices of the s largest diagonal entries (ties to lowest)."""
    P_hat = np.asarray(P_hat, dtype=float)
    d = P_hat.shape[0]
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= {d}, got s={s}")
    order = np.argsort(-np.diag(P_hat), kind="stable")[:s]
    return np.sort(order)


def sparse_spectral(
    data: Dataset,
    s: int,
    k: int,
    lam: float,
    rho_admm: float = ADMM_RHO,
    admm_tol: float = ADMM_TOL,
    admm_max_iters: int = ADMM_MAX_ITERS,
) -> SubspaceEstimate:
    """Moments -> Fantope ADMM -> support thresholding -> rank-k factor."""
    if not k <= s <= data.d:
        raise ValueError(f"need k <= s <= d, got k={k}, s={s}, d={data.d}")
    moments = weighted_moments(data)
    est, _ = sparse_spectral_from_moments(
        moments, data.d, s, k, lam, rho_admm, admm_tol, admm_max_iters
    )
    return est


def sparse_spectral_from_moments(
    moments: MomentMatrix,
    d: int,
    s: int,
    k: int,
    lam: float,
    rho_admm: float = ADMM_RHO,
    admm_tol: float = ADMM_TOL,
    admm_max_iters: int = ADMM_MAX_ITERS,
    warm: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[SubspaceEstimate, AdmmResult]:
    """sparse_spectral with the moment matrix precomputed (sweeps reuse it).

    Also returns the raw ADMM result so sweeps can warm-start the next
    lambda from it.
    """
    if not k <= s <= d:
        raise ValueError(f"need k <= s <= d, got k={k}, s={s}, d={d}")
    res = fantope_admm(moments.M, k, lam, rho_admm, admm_tol, admm_max_iters, warm)
    # The stored relaxed solution is re-projected onto the Fantope so it is
    # an exact member; at convergence this moves it by at most the primal
    # residual and barely perturbs the diagonal used for support recovery.
    relaxed = fantope_project(res.solution, k)
    support = recover_support(relaxed, s)
    restricted = relaxed[np.ix_(support, support)]
    factor = top_k_factor(restricted, k)
    est = SubspaceEstimate(
        support=support,
        factor=factor,
        relaxed=relaxed,
        admm_iters=res.iters,
        admm_residual=max(res.primal_residual, res.dual_residual),
        lam=float(lam),
    )
    return est, res


def pca_baseline(data: Dataset, k: int) -> np.ndarray:
    """Top-k eigenvector factor of the moment matrix, no sparsity handling."""
    if not 1 <= k <= data.d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={data.d}")
    return top_k_factor(weighted_moments(data).M, k)


def span_projector(params: MaxAffineParams) -> np.ndarray:
    """d x d orthogonal projector onto the span of the weight vectors."""
    A = params.weights.T
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > 1e-12 * max(sv[0], 1.0))) if sv.size else 0
    Q = U[:, :rank]
    P = Q @ Q.T
    return 0.5 * (P + P.T)


def subspace_error(
    factor: np.ndarray,
    reference_projector: np.ndarray,
    support: np.ndarray | None = None,
) -> float:
    """Frobenius distance between projectors, ||V V^T - P_ref||_F.

    A factor living on a support set (m rows, m < D) is embedded into the
    D x D frame through its support indices before comparison.
    """
    V = np.asarray(factor, dtype=float)
    P_ref = np.asarray(reference_projector, dtype=float)
    if V.ndim != 2 or P_ref.ndim != 2 or P_ref.shape[0] != P_ref.shape[1]:
        raise ValueError("factor must be (m, k) and reference (D, D)")
    D = P_ref.shape[0]
    proj = V @ V.T
    if V.shape[0] != D:
        if support is None or len(support) != V.shape[0]:
            raise ValueError(
                f"factor has {V.shape[0]} rows but reference is {D} x {D}; "
                "a support of matching size is required to embed"
            )
        embedded = np.zeros((D, D))
        embedded[np.ix_(support, support)] = proj
        proj = embedded
    return float(np.linalg.norm(proj - P_ref))


def sparse_spectral_sweep(
    data: Dataset,
    s: int,
    k: int,
    fractions: tuple[float, ...] = DEFAULT_LAMBDA_FRACTIONS,
    truth_projector: np.ndarray | None = None,
    rho_admm: float = ADMM_RHO,
    admm_tol: float = ADMM_TOL,
    admm_max_iters: int = ADMM_MAX_ITERS,
    cv_folds: int = 5,
    cv_candidates: int = 8,
    rng: np.random.Generator | None = None,
    variance_reduced: bool = True,
) -> SubspaceEstimate:
    """Sweep lam over fractions of ||M||_max and return the best estimate.

    With a known truth projector (Monte Carlo experiments) the sweep
    minimizes the subspace error; otherwise it cross-validates the
    held-out fit loss of a short downstream refinement.  Ties keep the
    smallest lam.  Consecutive solves warm-start from the previous one.
    By default the sweep runs on the residualized (variance-reduced)
    moments, which sharpens both support recovery and the subspace
    estimate at no cost to the population target.
    """
    moments = residualized_moments(data) if variance_reduced else weighted_moments(data)
    scale = float(np.max(np.abs(moments.M)))
    lams = [f * scale for f in fractions]
    estimates = []
    warm = None
    for lam in lams:
        est, res = sparse_spectral_from_moments(
            moments, data.d, s, k, lam, rho_admm, admm_tol, admm_max_iters, warm
        )
        estimates.append(est)
        warm = (res.solution, res.scaled_dual)
    if truth_projector is not None:
        scores = [
            subspace_error(est.factor, truth_projector, support=est.support)
            for est in estimates
        ]
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        seeds = rng.integers(0, 2**63 - 1, size=len(lams))
        scores = [
            _cv_fit_score(
                data, s, k, lam, cv_folds, cv_candidates, int(seed), variance_reduced
            )
            for lam, seed in zip(lams, seeds)
        ]
    return estimates[int(np.argmin(scores))]


def _cv_fit_score(
    data: Dataset,
    s: int,
    k: int,
    lam: float,
    folds: int,
    candidates: int,
    seed: int,
    variance_reduced: bool = True,
) -> float:
    """Mean held-out loss of a short random-search fit at one lam value."""
    from .search import random_search_init
    from .spgd import loss as fit_loss

    n = data.n
    folds = min(folds, n)
    bounds = np.linspace(0, n, folds + 1, dtype=int)
    total = 0.0
    for f in range(folds):
        val_idx = np.arange(bounds[f], bounds[f + 1])
        train_idx = np.setdiff1d(np.arange(n), val_idx)
        if train_idx.size == 0 or val_idx.size == 0:
            continue
        train = Dataset(X=data.X[train_idx], y=data.y[train_idx], meta=data.meta)
        val = Dataset(X=data.X[val_idx], y=data.y[val_idx], meta=data.meta)
        mom = residualized_moments(train) if variance_reduced else weighted_moments(train)
        est, _ = sparse_spectral_from_moments(mom, train.d, s, k, lam)
        rng = np.random.default_rng(np.random.SeedSequence([seed, f]))
        refined = random_search_init(
            train, s, k, est.factor, est.support, candidates, rng
        )
        total += fit_loss(refined, val)
    return total / folds
