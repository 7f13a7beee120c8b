"""Max-affine ground truth, synthetic data, and evaluation metrics.

A max-affine function is the pointwise maximum of k affine maps
x -> max_j (<a_j, x> + b_j).  This module holds the parameter container,
samplers for planted models and covariates, tropical-cell membership, and
the permutation-invariant relative error used to score estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

COVARIATE_DISTS = ("gaussian", "uniform")

# Relative errors are reported as log10 of a squared-norm ratio; exact
# recovery would be -inf, so clamp at double-precision scale.
ERR_FLOOR = -16.0

# Half-width of the zero-mean unit-variance uniform covariate distribution.
UNIFORM_HALF_WIDTH = math.sqrt(3.0)


@dataclass(frozen=True)
class MaxAffineParams:
    """Parameters of a k-piece max-affine model on R^d.

    weights    : (k, d) array, row j is the weight vector a_j.
    intercepts : (k,) array of intercepts b_j.

    Block j is the concatenation [a_j; b_j]; arrays are copied and frozen
    so instances can be shared across threads.
    """

    weights: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        b = np.array(self.intercepts, dtype=float, copy=True).ravel()
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D (k, d), got shape {w.shape}")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError(f"need k >= 1 and d >= 1, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ValueError(
                f"{b.shape[0]} intercepts for {w.shape[0]} weight rows"
            )
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercepts", b)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def block_matrix(self) -> np.ndarray:
        """(k, d+1) matrix with row j = [a_j, b_j]."""
        return np.hstack([self.weights, self.intercepts[:, None]])

    def concat(self) -> np.ndarray:
        """Flat parameter vector [a_1; b_1; ...; a_k; b_k] of length k(d+1)."""
        return self.block_matrix().ravel()

    @classmethod
    def from_block_matrix(cls, blocks: np.ndarray) -> "MaxAffineParams":
        blocks = np.asarray(blocks, dtype=float)
        if blocks.ndim != 2 or blocks.shape[1] < 2:
            raise ValueError(f"block matrix must be (k, d+1), got {blocks.shape}")
        return cls(weights=blocks[:, :-1], intercepts=blocks[:, -1])

    def joint_support(self) -> np.ndarray:
        """Sorted indices where any weight vector is nonzero."""
        return np.flatnonzero(np.any(self.weights != 0.0, axis=0))

    def is_jointly_sparse(self, s: int) -> bool:
        return self.joint_support().size <= s

    def is_blockwise_sparse(self, s: int) -> bool:
        return bool(np.all(np.count_nonzero(self.weights, axis=1) <= s))


@dataclass(frozen=True)
class DatasetMeta:
    covariate_dist: str
    sigma_z: float
    seed: int


@dataclass(frozen=True)
class Dataset:
    """n covariate rows with targets and optional generation metadata."""

    X: np.ndarray
    y: np.ndarray
    meta: DatasetMeta | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).ravel()
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D (n, d), got shape {X.shape}")
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{y.shape[0]} targets for {X.shape[0]} rows")
        if self.meta is not None and self.meta.sigma_z < 0:
            raise ValueError("sigma_z must be >= 0")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GroundTruthDiagnostics:
    """Conditioning summary of a planted model.

    kappa is the minimum pairwise distance between weight vectors (None
    when k = 1, where it is undefined); pi_hat holds empirical cell masses
    on a fresh Gaussian reference sample.
    """

    kappa: float | None
    pi_hat: np.ndarray
    pi_min_hat: float
    joint_support: np.ndarray


def evaluate(params: MaxAffineParams, x: np.ndarray) -> float:
    """Value of the max-affine function at a single point x."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != params.d:
        raise ValueError(f"x has length {x.shape[0]}, model dimension is {params.d}")
    return float(np.max(params.weights @ x + params.intercepts))


def evaluate_batch(params: MaxAffineParams, X: np.ndarray) -> np.ndarray:
    """Values of the max-affine function at every row of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.d:
        raise ValueError(f"X must be (n, {params.d}), got shape {X.shape}")
    return np.max(X @ params.weights.T + params.intercepts, axis=1)


def argmax_cell(params: MaxAffineParams, x: np.ndarray) -> int:
    """Index (0-based) of the affine piece achieving the maximum at x.

    Ties break to the lowest index, which turns the open tropical cells
    plus their boundary into a computable partition.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != params.d:
        raise ValueError(f"x has length {x.shape[0]}, model dimension is {params.d}")
    return int(np.argmax(params.weights @ x + params.intercepts))


def argmax_cell_batch(params: MaxAffineParams, X: np.ndarray) -> np.ndarray:
    """Cell index for every row of X (ties to lowest index)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.d:
        raise ValueError(f"X must be (n, {params.d}), got shape {X.shape}")
    return np.argmax(X @ params.weights.T + params.intercepts, axis=1)


def generate_ground_truth(
    d: int, s: int, k: int, rng: np.random.Generator
) -> MaxAffineParams:
    """Draw a jointly s-sparse planted model.

    One support of size s is drawn uniformly from [d]; on-support weights
    and all intercepts are i.i.d. standard normal, off-support weights are
    exactly zero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    support = np.sort(rng.choice(d, size=s, replace=False))
    weights = np.zeros((k, d))
    weights[:, support] = rng.standard_normal((k, s))
    intercepts = rng.standard_normal(k)
    return MaxAffineParams(weights=weights, intercepts=intercepts)


def generate_dataset(
    params: MaxAffineParams,
    n: int,
    covariate_dist: str,
    sigma_z: float,
    rng: np.random.Generator,
    seed: int | None = None,
) -> Dataset:
    """Sample covariates, evaluate the model, and add Gaussian noise.

    covariate_dist "gaussian" draws standard normal coordinates;
    "uniform" draws uniform on [-sqrt(3), sqrt(3)] per coordinate, which
    is zero-mean, isotropic, and unit-variance.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma_z < 0:
        raise ValueError("sigma_z must be >= 0")
    if covariate_dist not in COVARIATE_DISTS:
        raise ValueError(
            f"unknown covariate_dist {covariate_dist!r}, expected one of {COVARIATE_DISTS}"
        )
    if covariate_dist == "gaussian":
        X = rng.standard_normal((n, params.d))
    else:
        X = rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, size=(n, params.d))
    y = evaluate_batch(params, X)
    if sigma_z > 0:
        y = y + sigma_z * rng.standard_normal(n)
    meta = DatasetMeta(
        covariate_dist=covariate_dist,
        sigma_z=float(sigma_z),
        seed=-1 if seed is None else int(seed),
    )
    return Dataset(X=X, y=y, meta=meta)


def empirical_pi(params: MaxAffineParams, X: np.ndarray) -> np.ndarray:
    """Fraction of rows of X landing in each tropical cell; sums to 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a nonempty (n, d) matrix")
    cells = argmax_cell_batch(params, X)
    return np.bincount(cells, minlength=params.k) / X.shape[0]


def pairwise_min_weight_distance(params: MaxAffineParams) -> float:
    """min_{j != j'} ||a_j - a_j'||_2; requires k >= 2."""
    if params.k < 2:
        raise ValueError("pairwise distance needs k >= 2")
    best = math.inf
    for j, l in itertools.combinations(range(params.k), 2):
        best = min(best, float(np.linalg.norm(params.weights[j] - params.weights[l])))
    return best


def relative_error(est: MaxAffineParams, truth: MaxAffineParams) -> float:
    """log10 of the squared parameter error ratio under the best block matching.

    The estimate's blocks are matched to the truth's by the permutation
    minimizing the summed squared block distances (exact enumeration for
    k <= 8, optimal assignment beyond).  The result is clamped below at
    ERR_FLOOR so an exact match reports -16 rather than -inf.
    """
    if est.k != truth.k or est.d != truth.d:
        raise ValueError(
            f"shape mismatch: est is (k={est.k}, d={est.d}), "
            f"truth is (k={truth.k}, d={truth.d})"
        )
    truth_blocks = truth.block_matrix()
    denom = float(np.sum(truth_blocks**2))
    if denom == 0.0:
        raise ValueError("truth parameters are all zero")
    est_blocks = est.block_matrix()
    k = truth.k
    # cost[i, j] = ||est block i - truth block j||^2
    diff = est_blocks[:, None, :] - truth_blocks[None, :, :]
    cost = np.sum(diff**2, axis=2)
    if k <= 8:
        best = min(
            sum(cost[perm[j], j] for j in range(k))
            for perm in itertools.permutations(range(k))
        )
    else:
        rows, cols = linear_sum_assignment(cost)
        best = float(cost[rows, cols].sum())
    ratio = best / denom
    if ratio <= 0.0:
        return ERR_FLOOR
    return max(float(np.log10(ratio)), ERR_FLOOR)


def diagnostics(
    truth: MaxAffineParams, reference_n: int, rng: np.random.Generator
) -> GroundTruthDiagnostics:
    """Compute kappa exactly and cell masses on a Gaussian reference sample."""
    kappa = pairwise_min_weight_distance(truth) if truth.k >= 2 else None
    X = rng.standard_normal((reference_n, truth.d))
    pi_hat = empirical_pi(truth, X)
    return GroundTruthDiagnostics(
        kappa=kappa,
        pi_hat=pi_hat,
        pi_min_hat=float(pi_hat.min()),
        joint_support=truth.joint_support(),
    )
