"""Initialization search: coverings, scale fitting, and candidate selection."""

from __future__ import annotations

import numpy as np
import pytest

from maxaffine import (
    GuardError,
    build_covering,
    covering_search,
    generate_dataset,
    generate_ground_truth,
    optimal_scale,
    random_search_init,
)
from maxaffine.model import Dataset
from maxaffine.numerics import top_k_factor
from maxaffine.search import (
    candidate_fit_error,
    draw_random_candidate,
    lift_candidate,
)
from maxaffine.spectral import span_projector
from maxaffine.spgd import loss


def subspace_instance(seed=7, d=10, s=3, k=2, n=800, sigma=0.0):
    """Planted data plus the exact factor/support pair for its truth."""
    r = np.random.default_rng(seed)
    truth = generate_ground_truth(d=d, s=s, k=k, rng=r)
    data = generate_dataset(truth, n, "gaussian", sigma, r)
    support = truth.joint_support()
    P = span_projector(truth)
    factor = top_k_factor(P, k)[support, :]
    return truth, data, factor, support


class TestBuildCovering:
    def test_points_inside_unit_ball(self):
        cov = build_covering(k=2, r=0.5)
        norms = np.linalg.norm(cov.points, axis=1)
        assert norms.max() <= 1.0 + 1e-12
        assert cov.dim == 3

    def test_single_point_covers_with_huge_radius(self):
        cov = build_covering(k=1, r=2.0)
        # the origin alone already certifies radius 1 <= r
        assert cov.count >= 1
        u = np.array([0.99, 0.0])
        dists = np.linalg.norm(cov.points - u, axis=1)
        assert dists.min() <= 2.0

    def test_sampled_certificate(self):
        cov = build_covering(k=2, r=0.5)
        r = np.random.default_rng(0)
        raw = r.standard_normal((10_000, 3))
        radii = r.uniform(0, 1, 10_000) ** (1 / 3)
        U = raw / np.linalg.norm(raw, axis=1, keepdims=True) * radii[:, None]
        worst = 0.0
        for u in U:
            worst = max(worst, np.linalg.norm(cov.points - u, axis=1).min())
        assert worst <= 0.5

    def test_cardinality_grows_as_r_shrinks(self):
        c1 = build_covering(k=2, r=0.6)
        c2 = build_covering(k=2, r=0.3)
        assert c2.count >= c1.count

    def test_guard_names_bound(self):
        with pytest.raises(GuardError, match="increase r"):
            build_covering(k=5, r=0.01)

    def test_invalid_r(self):
        with pytest.raises(ValueError):
            build_covering(k=2, r=0.0)


class TestOptimalScale:
    def test_exact_multiple(self, rng):
        y_hat = rng.standard_normal(30)
        assert optimal_scale(2.0 * y_hat, y_hat) == pytest.approx(2.0)

    def test_negative_correlation_clamps(self, rng):
        y_hat = rng.standard_normal(30)
        assert optimal_scale(-y_hat, y_hat) == 0.0

    def test_zero_prediction(self):
        assert optimal_scale(np.ones(5), np.zeros(5)) == 0.0

    def test_beats_dense_grid(self, rng):
        y = rng.standard_normal(50)
        y_hat = rng.standard_normal(50)
        c = optimal_scale(y, y_hat)
        grid = np.linspace(0, 5, 10_000)
        losses = ((y[None, :] - grid[:, None] * y_hat[None, :]) ** 2).sum(axis=1)
        assert np.sum((y - c * y_hat) ** 2) <= losses.min() + 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            optimal_scale(np.ones(3), np.ones(4))


class TestLiftCandidate:
    def test_off_support_zero(self, rng):
        factor = np.linalg.qr(rng.standard_normal((3, 2)))[0]
        support = np.array([1, 4, 7])
        coords = rng.standard_normal((2, 3))
        lifted = lift_candidate(coords, 1.7, factor, support, d=9)
        off = np.setdiff1d(np.arange(9), support)
        assert np.all(lifted.weights[:, off] == 0)
        np.testing.assert_allclose(lifted.intercepts, 1.7 * coords[:, -1])

    def test_zero_scale_gives_zero_params(self, rng):
        factor = np.linalg.qr(rng.standard_normal((3, 2)))[0]
        lifted = lift_candidate(
            rng.standard_normal((2, 3)), 0.0, factor, np.array([0, 1, 2]), d=5
        )
        assert np.all(lifted.weights == 0)
        assert np.all(lifted.intercepts == 0)


class TestCoveringSearch:
    def test_returns_minimum_over_rescan(self):
        truth, data, factor, support = subspace_instance(k=1, n=200)
        cand = covering_search(data, 1, factor, support, r=0.4)
        # re-score every covering point by hand; none may beat the winner
        cov = build_covering(1, 0.4)
        for point in cov.points:
            coords = point[None, :]
            X_S = data.X[:, support]
            y_hat = X_S @ (factor @ coords[:, :-1].T)[:, 0] + coords[0, -1]
            c = optimal_scale(data.y, y_hat)
            err = float(np.mean((data.y - c * y_hat) ** 2))
            assert cand.fit_error <= err + 1e-9

    def test_candidate_consistency(self):
        truth, data, factor, support = subspace_instance(k=2, n=300)
        cand = covering_search(data, 2, factor, support, r=0.7)
        assert cand.scale >= 0
        off = np.setdiff1d(np.arange(data.d), support)
        assert np.all(cand.lifted.weights[:, off] == 0)
        assert candidate_fit_error(data, cand) == pytest.approx(
            cand.fit_error, rel=1e-9
        )

    def test_shrinking_r_never_hurts(self):
        truth, data, factor, support = subspace_instance(k=1, n=200)
        coarse = covering_search(data, 1, factor, support, r=0.5)
        fine = covering_search(data, 1, factor, support, r=0.25)
        assert fine.fit_error <= coarse.fit_error + 1e-12

    def test_tuple_guard_trips(self):
        truth, data, factor, support = subspace_instance(k=2, n=100)
        with pytest.raises(GuardError, match="random_search_init"):
            covering_search(data, 2, factor, support, r=0.02)

    def test_factor_shape_checked(self):
        truth, data, factor, support = subspace_instance(k=2, n=100)
        with pytest.raises(ValueError):
            covering_search(data, 2, factor.T, support, r=0.5)


class TestRandomSearch:
    def test_draw_respects_support(self):
        truth, data, factor, support = subspace_instance(k=2)
        cand = draw_random_candidate(
            data, 2, factor, support, np.random.default_rng(3)
        )
        off = np.setdiff1d(np.arange(data.d), support)
        assert np.all(cand.weights[:, off] == 0)

    def test_deterministic_given_stream(self):
        truth, data, factor, support = subspace_instance(k=2)
        a = random_search_init(
            data, 3, 2, factor, support, 4, np.random.default_rng(11)
        )
        b = random_search_init(
            data, 3, 2, factor, support, 4, np.random.default_rng(11)
        )
        np.testing.assert_array_equal(a.block_matrix(), b.block_matrix())

    def test_more_candidates_never_worse_in_loss(self):
        # the candidate stream is shared, so the best-of-M refined loss
        # is non-increasing in M along one stream
        truth, data, factor, support = subspace_instance(k=2, sigma=0.2)
        losses = []
        for M in (1, 4, 16):
            init = random_search_init(
                data, 3, 2, factor, support, M, np.random.default_rng(21)
            )
            losses.append(loss(init, data))
        assert losses[1] <= losses[0] + 1e-12
        assert losses[2] <= losses[1] + 1e-12

    def test_m_must_be_positive(self):
        truth, data, factor, support = subspace_instance(k=2)
        with pytest.raises(ValueError):
            random_search_init(
                data, 3, 2, factor, support, 0, np.random.default_rng(0)
            )

    def test_single_candidate_matches_manual_refine(self):
        truth, data, factor, support = subspace_instance(k=2)
        got = random_search_init(
            data, 3, 2, factor, support, 1, np.random.default_rng(8)
        )
        from maxaffine.spgd import SpgdConfig, fit_spgd

        cand = draw_random_candidate(
            data, 2, factor, support, np.random.default_rng(8)
        )
        report = fit_spgd(cand, data, SpgdConfig(s=3, max_iters=10, rel_tol=0.0))
        np.testing.assert_array_equal(
            got.block_matrix(), report.final.block_matrix()
        )
