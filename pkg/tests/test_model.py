"""Max-affine model: evaluation, cells, synthesis, and the error metric."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxaffine import (
    Dataset,
    MaxAffineParams,
    argmax_cell,
    empirical_pi,
    evaluate,
    generate_dataset,
    generate_ground_truth,
    relative_error,
)
from maxaffine.model import (
    argmax_cell_batch,
    diagnostics,
    evaluate_batch,
    pairwise_min_weight_distance,
)


def random_params(rng, k=3, d=5) -> MaxAffineParams:
    return MaxAffineParams(
        weights=rng.standard_normal((k, d)), intercepts=rng.standard_normal(k)
    )


class TestEvaluate:
    def test_single_piece_is_affine(self, rng):
        p = random_params(rng, k=1, d=4)
        x = rng.standard_normal(4)
        assert evaluate(p, x) == pytest.approx(p.weights[0] @ x + p.intercepts[0])

    def test_matches_batch(self, rng):
        p = random_params(rng)
        X = rng.standard_normal((20, 5))
        batch = evaluate_batch(p, X)
        for i in range(20):
            assert batch[i] == pytest.approx(evaluate(p, X[i]))

    @given(t=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
    def test_convex_in_x(self, t, seed):
        r = np.random.default_rng(seed)
        p = random_params(r)
        x1, x2 = r.standard_normal(5), r.standard_normal(5)
        lhs = evaluate(p, t * x1 + (1 - t) * x2)
        rhs = t * evaluate(p, x1) + (1 - t) * evaluate(p, x2)
        assert lhs <= rhs + 1e-12


class TestCells:
    def test_partition_counts_sum_to_n(self, rng):
        p = random_params(rng)
        X = rng.standard_normal((200, 5))
        cells = argmax_cell_batch(p, X)
        assert cells.shape == (200,)
        counts = np.bincount(cells, minlength=p.k)
        assert counts.sum() == 200

    def test_tie_goes_to_lowest_index(self):
        # two identical pieces: every point ties, index 0 must win
        p = MaxAffineParams(weights=np.ones((2, 3)), intercepts=np.zeros(2))
        assert argmax_cell(p, np.array([1.0, 2.0, 3.0])) == 0

    def test_cell_attains_the_max(self, rng):
        p = random_params(rng)
        x = rng.standard_normal(5)
        j = argmax_cell(p, x)
        assert p.weights[j] @ x + p.intercepts[j] == pytest.approx(evaluate(p, x))

    def test_empirical_pi_simplex(self, rng):
        p = random_params(rng)
        X = rng.standard_normal((500, 5))
        pi = empirical_pi(p, X)
        assert pi.shape == (p.k,)
        assert np.all(pi >= 0) and np.all(pi <= 1)
        assert pi.sum() == pytest.approx(1.0)


class TestGeneration:
    def test_ground_truth_jointly_sparse(self, rng):
        truth = generate_ground_truth(d=30, s=7, k=4, rng=rng)
        assert truth.is_jointly_sparse(7)
        support = truth.joint_support()
        assert support.size <= 7
        assert np.all(np.diff(support) > 0)
        off = np.setdiff1d(np.arange(30), support)
        assert np.all(truth.weights[:, off] == 0)

    def test_invalid_sizes_rejected(self, rng):
        with pytest.raises(ValueError):
            generate_ground_truth(d=5, s=9, k=2, rng=rng)
        with pytest.raises(ValueError):
            generate_ground_truth(d=5, s=2, k=0, rng=rng)

    def test_dataset_shapes_and_noiseless_consistency(self, rng):
        truth = generate_ground_truth(d=8, s=3, k=2, rng=rng)
        data = generate_dataset(truth, 100, "gaussian", 0.0, rng)
        assert data.X.shape == (100, 8)
        assert data.y.shape == (100,)
        np.testing.assert_allclose(data.y, evaluate_batch(truth, data.X))

    def test_noise_level(self, rng):
        truth = generate_ground_truth(d=8, s=3, k=2, rng=rng)
        data = generate_dataset(truth, 20000, "gaussian", 0.5, rng)
        resid = data.y - evaluate_batch(truth, data.X)
        assert resid.std() == pytest.approx(0.5, rel=0.05)

    def test_uniform_covariates_standardized(self, rng):
        truth = generate_ground_truth(d=6, s=2, k=2, rng=rng)
        data = generate_dataset(truth, 50000, "uniform", 0.0, rng)
        assert np.abs(data.X).max() <= np.sqrt(3) + 1e-12
        assert np.abs(data.X.mean(axis=0)).max() < 0.05
        assert np.abs(data.X.var(axis=0) - 1).max() < 0.05

    def test_unknown_distribution_rejected(self, rng):
        truth = generate_ground_truth(d=6, s=2, k=2, rng=rng)
        with pytest.raises(ValueError):
            generate_dataset(truth, 10, "cauchy", 0.0, rng)

    def test_prefix_property_in_n(self, rng):
        # same stream, larger n: the first rows coincide, so sample-size
        # sweeps see nested datasets
        truth = generate_ground_truth(d=6, s=2, k=2, rng=rng)
        a = generate_dataset(truth, 50, "gaussian", 0.0, np.random.default_rng(9))
        b = generate_dataset(truth, 80, "gaussian", 0.0, np.random.default_rng(9))
        np.testing.assert_array_equal(a.X, b.X[:50])


class TestRelativeError:
    def test_exact_match_hits_floor(self, rng):
        truth = generate_ground_truth(d=10, s=3, k=3, rng=rng)
        assert relative_error(truth, truth) == -16.0

    def test_block_permutation_hits_floor(self, rng):
        truth = generate_ground_truth(d=10, s=3, k=3, rng=rng)
        perm = MaxAffineParams(
            weights=truth.weights[[2, 0, 1]], intercepts=truth.intercepts[[2, 0, 1]]
        )
        assert relative_error(perm, truth) == -16.0

    def test_identical_permutation_of_both_is_invariant(self, rng):
        est, truth = random_params(rng), random_params(rng)
        order = [1, 2, 0]
        est_p = MaxAffineParams(est.weights[order], est.intercepts[order])
        truth_p = MaxAffineParams(truth.weights[order], truth.intercepts[order])
        assert relative_error(est, truth) == pytest.approx(
            relative_error(est_p, truth_p)
        )

    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_enumeration(self, seed):
        r = np.random.default_rng(seed)
        k, d = 3, 4
        est, truth = random_params(r, k, d), random_params(r, k, d)
        E = np.hstack([est.weights, est.intercepts[:, None]])
        T = np.hstack([truth.weights, truth.intercepts[:, None]])
        denom = np.sum(T**2)
        best = min(
            sum(np.sum((E[list(p)[j]] - T[j]) ** 2) for j in range(k)) / denom
            for p in itertools.permutations(range(k))
        )
        expect = max(np.log10(best), -16.0) if best > 0 else -16.0
        assert relative_error(est, truth) == pytest.approx(expect)

    def test_zero_truth_rejected(self, rng):
        est = random_params(rng)
        zero = MaxAffineParams(np.zeros((3, 5)), np.zeros(3))
        with pytest.raises(ValueError):
            relative_error(est, zero)


class TestDiagnostics:
    def test_orthonormal_pair_kappa(self, rng):
        p = MaxAffineParams(
            weights=np.array([[1.0, 0.0], [0.0, 1.0]]), intercepts=np.zeros(2)
        )
        diag = diagnostics(p, reference_n=100, rng=rng)
        assert diag.kappa == pytest.approx(np.sqrt(2.0))

    def test_symmetric_split_pi(self, rng):
        p = MaxAffineParams(
            weights=np.array([[1.0, 0.0], [-1.0, 0.0]]), intercepts=np.zeros(2)
        )
        diag = diagnostics(p, reference_n=10_000, rng=rng)
        np.testing.assert_allclose(diag.pi_hat, [0.5, 0.5], atol=0.02)

    def test_identical_blocks_kappa_zero(self, rng):
        p = MaxAffineParams(weights=np.ones((2, 3)), intercepts=np.zeros(2))
        assert pairwise_min_weight_distance(p) == 0.0


class TestDatasetValidation:
    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            Dataset(X=np.zeros((5, 2)), y=np.zeros(4), meta=None)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Dataset(X=np.zeros((0, 2)), y=np.zeros(0), meta=None)
