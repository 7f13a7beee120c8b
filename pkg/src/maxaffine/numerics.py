"""Shared numerical kernels: symmetric eigendecomposition, Fantope
projection, and the thresholding operators used by the optimizer and the
spectral initializer.

All matrices here are dense and small (a few hundred columns at most).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Bisection for the Fantope eigenvalue shift stops at this trace accuracy.
_FANTOPE_TRACE_TOL = 1e-12
_FANTOPE_BISECT_CAP = 200


@dataclass(frozen=True)
class SymmetricEig:
    """Eigendecomposition with descending eigenvalues and a fixed sign
    convention (first nonzero entry of each eigenvector is nonnegative)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _symmetrize(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return 0.5 * (A + A.T)


def sym_eig(A: np.ndarray) -> SymmetricEig:
    """Full symmetric eigendecomposition, deterministic for fixed input.

    Input is symmetrized as (A + A^T)/2 first.  Columns are sign-fixed so
    repeated calls are bit-stable.
    """
    S = _symmetrize(A)
    vals, vecs = np.linalg.eigh(S)
    # eigh returns ascending order; flip to descending
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    for i in range(vecs.shape[1]):
        col = vecs[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        pivot = col[nz[0]] if nz.size else 0.0
        if pivot < 0:
            vecs[:, i] = -col
    return SymmetricEig(eigenvalues=vals, eigenvectors=vecs)


def _clipped_eigenvalue_shift(vals: np.ndarray, k: int) -> np.ndarray:
    """Shift-and-clip eigenvalues into [0, 1] so they sum to k.

    The trace sum(clip(vals + theta, 0, 1)) is continuous and nondecreasing
    in theta; theta is located by bisection on a bracket guaranteed to span
    traces 0 and m.
    """
    lo = -float(vals.max()) - 1.0
    hi = -float(vals.min()) + 1.0
    theta = 0.0
    for _ in range(_FANTOPE_BISECT_CAP):
        theta = 0.5 * (lo + hi)
        trace = float(np.clip(vals + theta, 0.0, 1.0).sum())
        if abs(trace - k) <= _FANTOPE_TRACE_TOL:
            break
        if trace < k:
            lo = theta
        else:
            hi = theta
    return np.clip(vals + theta, 0.0, 1.0)


def fantope_project(A: np.ndarray, k: int) -> np.ndarray:
    """Frobenius-nearest matrix with eigenvalues in [0, 1] and trace k.

    This is the projection onto the convex hull of rank-k orthogonal
    projection matrices.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= {m}, got k={k}")
    eig = sym_eig(A)
    clipped = _clipped_eigenvalue_shift(eig.eigenvalues, k)
    Q = eig.eigenvectors
    P = (Q * clipped) @ Q.T
    return 0.5 * (P + P.T)


def fantope_membership_gap(P: np.ndarray, k: int) -> float:
    """Largest violation of the eigenvalue-box and trace constraints.

    Zero (up to floating point) iff P lies in the trace-k Fantope.
    """
    vals = np.linalg.eigvalsh(_symmetrize(P))
    eig_viol = max(float(-vals.min()), float(vals.max() - 1.0), 0.0)
    return max(eig_viol, abs(float(np.trace(P)) - k))


def soft_threshold(A: np.ndarray, t: float) -> np.ndarray:
    """Entrywise sign(a) * max(|a| - t, 0); the proximal map of t*||.||_1."""
    if t < 0:
        raise ValueError("threshold must be >= 0")
    A = np.asarray(A, dtype=float)
    return np.sign(A) * np.maximum(np.abs(A) - t, 0.0)


def top_s_support(v: np.ndarray, s: int) -> np.ndarray:
    """Sorted indices of the s largest-magnitude entries (ties to lowest)."""
    v = np.asarray(v, dtype=float)
    if not 0 <= s <= v.shape[0]:
        raise ValueError(f"need 0 <= s <= {v.shape[0]}, got s={s}")
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    return np.sort(keep)


def hard_threshold_vector(v: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries (ties to lowest index), zero the
    rest; the Euclidean projection onto s-sparse vectors."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    keep = top_s_support(v, s)
    out[keep] = v[keep]
    return out


def top_k_factor(A: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal m x k matrix of the top-k eigenvectors of (A + A^T)/2.

    V V^T is the Frobenius-nearest rank-k projector to A.  A degenerate
    spectrum at the cut (eigenvalue k == eigenvalue k+1 within 1e-12)
    leaves the subspace ill-defined; a RuntimeWarning is raised and the
    deterministic eigensolver ordering is kept.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= {m}, got k={k}")
    eig = sym_eig(A)
    if k < m and abs(eig.eigenvalues[k - 1] - eig.eigenvalues[k]) <= 1e-12:
        warnings.warn(
            "eigenvalues k and k+1 coincide; the rank-k subspace is ill-defined",
            RuntimeWarning,
            stacklevel=2,
        )
    return eig.eigenvectors[:, :k].copy()
