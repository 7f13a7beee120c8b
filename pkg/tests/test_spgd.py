"""Sparse gradient descent: losses, gradients, steps, and full fits."""

from __future__ import annotations

import numpy as np
import pytest

from maxaffine import (
    MaxAffineParams,
    SpgdConfig,
    block_gradient,
    fit_spgd,
    generate_dataset,
    generate_ground_truth,
    loss,
    relative_error,
    spgd_step,
)
from maxaffine.model import Dataset, pairwise_min_weight_distance
from maxaffine.spgd import augment


def ols_blocks(data):
    """Exact least-squares solution for the k=1 model, as [a; b]."""
    Xi = augment(data.X)
    sol, _, _, _ = np.linalg.lstsq(Xi, data.y, rcond=None)
    return sol


def perturbed(truth, scale, rng):
    kappa = pairwise_min_weight_distance(truth)
    pert = rng.standard_normal((truth.k, truth.d + 1))
    pert *= scale * kappa / np.linalg.norm(pert)
    return MaxAffineParams.from_block_matrix(truth.block_matrix() + pert)


class TestLoss:
    def test_truth_noiseless_zero(self, planted):
        truth, data = planted
        assert loss(truth, data) == pytest.approx(0.0, abs=1e-20)

    def test_k1_equals_half_mse(self, rng):
        truth = generate_ground_truth(d=6, s=3, k=1, rng=rng)
        data = generate_dataset(truth, 80, "gaussian", 0.3, rng)
        p = MaxAffineParams(rng.standard_normal((1, 6)), rng.standard_normal(1))
        resid = data.X @ p.weights[0] + p.intercepts[0] - data.y
        assert loss(p, data) == pytest.approx(0.5 * np.mean(resid**2))

    def test_quadratic_scaling_in_residuals(self, rng):
        truth = generate_ground_truth(d=5, s=2, k=2, rng=rng)
        data = generate_dataset(truth, 60, "gaussian", 0.0, rng)
        p = MaxAffineParams(rng.standard_normal((2, 5)), rng.standard_normal(2))
        doubled = Dataset(X=data.X, y=2 * data.y, meta=None)
        p2 = MaxAffineParams(2 * p.weights, 2 * p.intercepts)
        assert loss(p2, doubled) == pytest.approx(4 * loss(p, data))

    def test_dimension_mismatch(self, rng, planted):
        _, data = planted
        p = MaxAffineParams(rng.standard_normal((2, 5)), rng.standard_normal(2))
        with pytest.raises(ValueError):
            loss(p, data)


class TestBlockGradient:
    def test_zero_at_truth_noiseless(self, planted):
        truth, data = planted
        for j in range(truth.k):
            np.testing.assert_allclose(
                block_gradient(truth, data, j), 0.0, atol=1e-12
            )

    def test_k1_matches_ols_gradient(self, rng):
        truth = generate_ground_truth(d=6, s=3, k=1, rng=rng)
        data = generate_dataset(truth, 70, "gaussian", 0.2, rng)
        p = MaxAffineParams(rng.standard_normal((1, 6)), rng.standard_normal(1))
        Xi = augment(data.X)
        theta = np.concatenate([p.weights[0], p.intercepts])
        expect = Xi.T @ (Xi @ theta - data.y) / data.n
        np.testing.assert_allclose(block_gradient(p, data, 0), expect, atol=1e-12)

    def test_matches_finite_differences(self, rng):
        truth = generate_ground_truth(d=5, s=3, k=3, rng=rng)
        data = generate_dataset(truth, 400, "gaussian", 0.1, rng)
        p = perturbed(truth, 0.2, rng)
        h = 1e-6
        for j in range(3):
            grad = block_gradient(p, data, j)
            fd = np.zeros(6)
            Theta = p.block_matrix()
            for c in range(6):
                up, dn = Theta.copy(), Theta.copy()
                up[j, c] += h
                dn[j, c] -= h
                fd[c] = (
                    loss(MaxAffineParams.from_block_matrix(up), data)
                    - loss(MaxAffineParams.from_block_matrix(dn), data)
                ) / (2 * h)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom <= 1e-5

    def test_index_out_of_range(self, planted):
        truth, data = planted
        with pytest.raises(ValueError):
            block_gradient(truth, data, truth.k)


class TestStep:
    def test_truth_is_fixed_point_noiseless(self, planted):
        truth, data = planted
        stepped = spgd_step(truth, data, s=4)
        assert (
            np.abs(stepped.block_matrix() - truth.block_matrix()).max() <= 1e-9
        )

    def test_k1_full_support_step_solves_ols(self, rng):
        # with one block and s=d the cell is everything, so the refit
        # stage lands on the least-squares solution in a single step
        truth = generate_ground_truth(d=6, s=6, k=1, rng=rng)
        data = generate_dataset(truth, 90, "gaussian", 0.3, rng)
        p = MaxAffineParams(rng.standard_normal((1, 6)), rng.standard_normal(1))
        stepped = spgd_step(p, data, s=6)
        np.testing.assert_allclose(
            np.concatenate([stepped.weights[0], stepped.intercepts]),
            ols_blocks(data),
            atol=1e-8,
        )

    def test_empty_cell_block_frozen(self, rng):
        # block 1 sits far below block 0 everywhere, so its cell is empty
        p = MaxAffineParams(
            weights=np.array([[0.0, 0.0], [0.0, 0.0]]),
            intercepts=np.array([0.0, -100.0]),
        )
        X = rng.standard_normal((50, 2))
        data = Dataset(X=X, y=X[:, 0] ** 2, meta=None)
        stepped = spgd_step(p, data, s=1)
        np.testing.assert_array_equal(stepped.weights[1], p.weights[1])
        assert stepped.intercepts[1] == p.intercepts[1]

    def test_result_respects_sparsity(self, rng):
        truth = generate_ground_truth(d=10, s=3, k=3, rng=rng)
        data = generate_dataset(truth, 300, "gaussian", 0.1, rng)
        p = MaxAffineParams(rng.standard_normal((3, 10)), rng.standard_normal(3))
        stepped = spgd_step(p, data, s=3)
        assert stepped.is_blockwise_sparse(3)


class TestFit:
    def test_truth_init_converges_immediately(self, planted):
        truth, data = planted
        report = fit_spgd(truth, data, SpgdConfig(s=4, trace_truth=truth))
        assert report.converged
        assert report.iters_run == 1
        assert np.all(report.dist_trace <= 1e-9)

    def test_local_init_recovers_noiseless(self, rng):
        truth = generate_ground_truth(d=40, s=6, k=3, rng=rng)
        data = generate_dataset(truth, 1200, "gaussian", 0.0, rng)
        init = perturbed(truth, 0.05, rng)
        report = fit_spgd(init, data, SpgdConfig(s=6))
        assert relative_error(report.final, truth) <= -10

    def test_k1_converges_to_ols(self, rng):
        truth = generate_ground_truth(d=6, s=6, k=1, rng=rng)
        data = generate_dataset(truth, 90, "gaussian", 0.3, rng)
        init = MaxAffineParams(rng.standard_normal((1, 6)), rng.standard_normal(1))
        report = fit_spgd(init, data, SpgdConfig(s=6))
        np.testing.assert_allclose(
            np.concatenate([report.final.weights[0], report.final.intercepts]),
            ols_blocks(data),
            atol=1e-8,
        )

    def test_traces_and_pi_invariants(self, rng):
        truth = generate_ground_truth(d=12, s=4, k=3, rng=rng)
        data = generate_dataset(truth, 400, "gaussian", 0.2, rng)
        init = perturbed(truth, 0.05, rng)
        cfg = SpgdConfig(s=4, max_iters=20, rel_tol=0.0, trace_truth=truth)
        report = fit_spgd(init, data, cfg)
        assert report.iters_run == 20
        assert not report.converged
        assert len(report.loss_trace) == report.iters_run + 1
        assert len(report.pi_trace) == report.iters_run + 1
        assert len(report.dist_trace) == report.iters_run + 1
        pis = np.asarray(report.pi_trace)
        assert np.all(pis >= 0) and np.all(pis <= 1)
        np.testing.assert_allclose(pis.sum(axis=1), 1.0)
        # adaptive step size 1/pi_j is always >= 1 on nonempty cells
        nonempty = pis[pis > 0]
        assert np.all(1.0 / nonempty >= 1.0)

    def test_iterates_stay_sparse(self, rng):
        truth = generate_ground_truth(d=15, s=4, k=2, rng=rng)
        data = generate_dataset(truth, 500, "gaussian", 0.1, rng)
        dense_init = MaxAffineParams(
            rng.standard_normal((2, 15)), rng.standard_normal(2)
        )
        report = fit_spgd(dense_init, data, SpgdConfig(s=4, max_iters=5))
        assert report.final.is_blockwise_sparse(4)

    def test_local_contraction_trace(self, rng):
        # distance to the truth shrinks monotonically from a local start
        ok_iters = 0
        total_iters = 0
        contractions = []
        for trial in range(10):
            r = np.random.default_rng(trial)
            truth = generate_ground_truth(d=30, s=5, k=3, rng=r)
            data = generate_dataset(truth, 900, "gaussian", 0.0, r)
            init = perturbed(truth, 0.05, r)
            cfg = SpgdConfig(s=5, trace_truth=truth)
            report = fit_spgd(init, data, cfg)
            dist = report.dist_trace
            ok_iters += int(np.sum(np.diff(dist) <= 1e-12))
            total_iters += dist.size - 1
            contractions.append(dist[-1] / dist[0])
        assert ok_iters / total_iters >= 0.9
        assert np.median(contractions) <= 1e-6

    def test_noise_floor_improves_with_n(self):
        # median squared distance falls when the sample count quadruples
        sq = {200: [], 800: []}
        for trial in range(12):
            r = np.random.default_rng(100 + trial)
            truth = generate_ground_truth(d=10, s=3, k=2, rng=r)
            Xfull = r.standard_normal((800, 10))
            noise = r.standard_normal(800)
            for n in (200, 800):
                y = np.max(Xfull[:n] @ truth.weights.T + truth.intercepts, axis=1)
                data = Dataset(X=Xfull[:n], y=y + 0.5 * noise[:n], meta=None)
                init = perturbed(truth, 0.05, np.random.default_rng(999 + trial))
                report = fit_spgd(init, data, SpgdConfig(s=3, max_iters=50))
                delta = report.final.concat() - truth.concat()
                sq[n].append(float(delta @ delta))
        assert np.median(sq[800]) < np.median(sq[200])

    def test_zero_init_uses_absolute_stop(self, rng):
        truth = generate_ground_truth(d=4, s=2, k=1, rng=rng)
        data = generate_dataset(truth, 50, "gaussian", 0.0, rng)
        zero = MaxAffineParams(np.zeros((1, 4)), np.zeros(1))
        report = fit_spgd(zero, data, SpgdConfig(s=2, max_iters=10))
        assert np.isfinite(report.loss_trace).all()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SpgdConfig(s=0)
        with pytest.raises(ValueError):
            SpgdConfig(s=1, max_iters=0)
        with pytest.raises(ValueError):
            SpgdConfig(s=1, rel_tol=-1e-3)
        SpgdConfig(s=1, rel_tol=0.0)  # 0 disables early stopping
