"""Tests for the first-order solvers."""

import numpy as np
import pytest

from ctnreg.errors import InvalidInputError
from ctnreg.linalg import nuclear_norm
from ctnreg.mlr import MlrObjective, accuracy, objective_value_and_grad
from ctnreg.optim import (
    GdConfig,
    WolfeParams,
    gradient_descent,
    sgd_momentum,
    subgradient_descent,
    two_phase_lr,
    wolfe_linesearch,
)
from ctnreg.regularizers import RegularizerSpec

from test_mlr import separable_blobs


def quadratic_ray(curvature, minimizer):
    """phi(a) for f(a) = 0.5 * curvature * (a - minimizer)^2."""

    def phi(alpha):
        return (
            0.5 * curvature * (alpha - minimizer) ** 2,
            curvature * (alpha - minimizer),
        )

    return phi


class TestWolfeLinesearch:
    def test_exact_quadratic_minimizer_accepted(self):
        phi = quadratic_ray(1.0, 1.0)
        res = wolfe_linesearch(phi, f0=0.5, slope0=-1.0,
                               params=WolfeParams(c1=1e-4, c2=0.9))
        assert res.alpha == pytest.approx(1.0)
        assert res.sufficient_decrease and res.curvature

    @pytest.mark.parametrize("seed", range(20))
    def test_random_quadratics_satisfy_both_conditions(self, seed):
        rng = np.random.default_rng(seed)
        q = rng.uniform(0.05, 20.0)
        s = rng.uniform(0.01, 30.0)
        phi = quadratic_ray(q, s)
        f0, slope0 = phi(0.0)
        res = wolfe_linesearch(phi, f0, slope0)
        fa, ga = phi(res.alpha)
        assert res.sufficient_decrease and res.curvature
        assert fa <= f0 + 1e-4 * res.alpha * slope0
        assert abs(ga) <= 0.9 * abs(slope0)

    def test_ascent_direction_rejected(self):
        with pytest.raises(InvalidInputError):
            wolfe_linesearch(quadratic_ray(1.0, -1.0), f0=0.5, slope0=1.0)

    def test_budget_exhaustion_returns_armijo_point(self):
        # minimizer so far out that doubling from 1 cannot bracket it
        phi = quadratic_ray(1e-9, 1e12)
        f0, slope0 = phi(0.0)
        res = wolfe_linesearch(
            phi, f0, slope0, params=WolfeParams(max_bracket_steps=5)
        )
        assert res.sufficient_decrease
        assert not res.curvature

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            WolfeParams(c1=0.5, c2=0.3)
        with pytest.raises(InvalidInputError):
            WolfeParams(c1=0.0, c2=0.9)


class TestGradientDescent:
    def test_quadratic_grad_tol_stop(self):
        def vag(w):
            return 0.5 * float(np.sum(w * w)), w

        w0 = np.full((2, 3), 2.0)
        w, rep = gradient_descent(vag, GdConfig(w0=w0))
        assert rep.stop_reason == "grad-tol"
        assert np.abs(w).max() <= 1e-4

    def test_separable_mlr_perfect_train_accuracy(self):
        x, y = separable_blobs(42, n_per_class=20)
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("none"))
        cfg = GdConfig(w0=np.zeros((2, 2)), max_iters=2000)
        w, rep = gradient_descent(lambda v: objective_value_and_grad(v, obj), cfg)
        assert accuracy(w, x, y) == 1.0
        assert rep.iterations <= 2000

    @pytest.mark.parametrize("seed", range(5))
    def test_trajectory_nonincreasing(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((12, 3))
        y = np.zeros((12, 3))
        y[np.arange(12), rng.integers(0, 3, size=12)] = 1.0
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("coupled", 0.1))
        cfg = GdConfig(w0=np.zeros((3, 3)), max_iters=200)
        _, rep = gradient_descent(lambda v: objective_value_and_grad(v, obj), cfg)
        traj = np.array(rep.objective_trajectory)
        assert np.all(np.diff(traj) <= 1e-10)


def svt_oracle(a, threshold):
    """Closed-form prox of the nuclear norm: shrink the singular values."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return (u * np.maximum(s - threshold, 0.0)) @ vt


class TestSubgradientDescent:
    def test_smooth_quadratic_monotone_approach(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 3))
        seen = []

        def vag(x):
            seen.append(np.linalg.norm(x - a))
            return 0.5 * float(np.sum((x - a) ** 2)), x - a

        x0 = a + rng.standard_normal((4, 3))
        best, rep = subgradient_descent(vag, x0, grad_tol=1e-10, max_iters=30)
        distances = np.array(seen)
        assert np.all(np.diff(distances) <= 1e-12)
        assert rep.objective_trajectory[-1] <= rep.objective_trajectory[0]
        assert np.linalg.norm(best - a) <= 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_nuclear_plus_quadratic_vs_svt_oracle(self, seed):
        rng = np.random.default_rng(7000 + seed)
        a = rng.standard_normal((6, 3))

        def vag(x):
            u, s, vt = np.linalg.svd(x, full_matrices=False)
            keep = s > 1e-12 * max(s[0], 1e-300)
            sub = (u[:, keep] @ vt[keep]) + (x - a)
            return nuclear_norm(x) + 0.5 * float(np.sum((x - a) ** 2)), sub

        best, rep = subgradient_descent(vag, a.copy(), grad_tol=1e-2, max_iters=50)
        prox = svt_oracle(a, 1.0)
        oracle_value = nuclear_norm(prox) + 0.5 * float(np.sum((prox - a) ** 2))
        achieved = rep.objective_trajectory[-1]
        assert achieved <= 1.05 * oracle_value

    def test_zero_iterations_returns_start(self):
        x0 = np.ones((2, 2))
        best, rep = subgradient_descent(
            lambda x: (float(np.sum(x * x)), 2 * x), x0, max_iters=0
        )
        np.testing.assert_array_equal(best, x0)
        assert rep.iterations == 0

    def test_best_trajectory_nonincreasing(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((5, 2))

        def vag(x):
            return float(np.abs(x - a).sum()), np.sign(x - a)

        _, rep = subgradient_descent(vag, np.zeros((5, 2)), max_iters=40)
        traj = np.array(rep.objective_trajectory)
        assert np.all(np.diff(traj) <= 0.0)


class TestSgdMomentum:
    def test_zero_momentum_full_batch_is_gradient_descent(self):
        rng = np.random.default_rng(2)
        target = rng.standard_normal((3, 2))

        def batch_fn(params, idx):
            (p,) = params
            return 0.5 * float(np.sum((p - target) ** 2)), [p - target]

        p0 = np.zeros((3, 2))
        params, _ = sgd_momentum(
            batch_fn, [p0], 10, epochs=5, lr=0.1, momentum=0.0, batch_size=100, seed=0
        )
        manual = p0.copy()
        for _ in range(5):
            manual = manual - 0.1 * (manual - target)
        np.testing.assert_array_equal(params[0], manual)

    def test_seed_determinism(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((40, 3))

        def batch_fn(params, idx):
            (p,) = params
            r = p - data[idx].mean(axis=0)
            return 0.5 * float(np.sum(r * r)), [r]

        runs = []
        for _ in range(2):
            params, losses = sgd_momentum(
                batch_fn, [np.zeros(3)], 40, epochs=8, lr=0.05,
                momentum=0.9, batch_size=16, seed=123,
            )
            runs.append((params[0].copy(), list(losses)))
        np.testing.assert_array_equal(runs[0][0], runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_small_mlp_loss_halves(self):
        from ctnreg import dnn
        from test_mlr import one_hot

        rng = np.random.default_rng(4)
        x = np.vstack(
            (
                rng.normal(-1.0, 0.6, size=(100, 5)),
                rng.normal(1.0, 0.6, size=(100, 5)),
            )
        )
        y = one_hot([0] * 100 + [1] * 100, 2)
        theta0 = dnn.init_mlp([5, 16, 2], seed=0)

        def batch_fn(param_list, idx):
            theta = dnn.MlpParams.from_list(param_list)
            return dnn.mlp_value_and_grads(theta, x[idx], y[idx])

        _, losses = sgd_momentum(
            batch_fn, theta0.to_list(), 200, epochs=100,
            lr=two_phase_lr(0.01, 100), momentum=0.9, batch_size=128, seed=5,
        )
        assert losses[-1] <= 0.5 * losses[0]

    def test_two_phase_schedule(self):
        lr = two_phase_lr(0.01, 100)
        assert lr(0) == 0.01 and lr(49) == 0.01
        assert lr(50) == pytest.approx(0.001) and lr(99) == pytest.approx(0.001)

    def test_empty_dataset_rejected(self):
        with pytest.raises(InvalidInputError):
            sgd_momentum(lambda p, i: (0.0, p), [np.zeros(2)], 0, epochs=1, lr=0.1)
