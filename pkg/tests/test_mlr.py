"""Tests for multinomial logistic regression."""

import numpy as np
import pytest

from ctnreg.errors import InvalidInputError
from ctnreg.mlr import (
    MlrObjective,
    accuracy,
    fit,
    mlr_loss_and_grad,
    objective_value_and_grad,
    predict,
    softmax_probs,
)
from ctnreg.regularizers import RegularizerSpec

from test_regularizers import central_diff


def one_hot(labels, c):
    y = np.zeros((len(labels), c))
    y[np.arange(len(labels)), labels] = 1.0
    return y


def random_instance(seed, n=10, m=4, c=3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, m))
    y = one_hot(rng.integers(0, c, size=n), c)
    w = rng.standard_normal((c, m))
    return x, y, w


def separable_blobs(seed, n_per_class=20, margin=3.0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(loc=(-margin, 0.0), scale=0.5, size=(n_per_class, 2))
    x1 = rng.normal(loc=(margin, 0.0), scale=0.5, size=(n_per_class, 2))
    x = np.vstack((x0, x1))
    y = one_hot([0] * n_per_class + [1] * n_per_class, 2)
    return x, y


class TestSoftmax:
    def test_zero_weights_uniform(self):
        x, y, _ = random_instance(0)
        p = softmax_probs(np.zeros((3, 4)), x)
        np.testing.assert_allclose(p, np.full((10, 3), 1.0 / 3.0))

    def test_huge_logit_stability(self):
        w = np.array([[1000.0], [0.0]])
        x = np.array([[1.0]])
        p = softmax_probs(w, x)
        assert np.all(np.isfinite(p))
        assert p[0, 0] == pytest.approx(1.0)
        assert p[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_rows_sum_to_one(self):
        x, _, w = random_instance(1)
        p = softmax_probs(w, x)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p > 0) and np.all(p < 1)

    def test_translation_invariance(self):
        x, _, w = random_instance(2)
        shift = np.random.default_rng(3).standard_normal(4)
        p1 = softmax_probs(w, x)
        p2 = softmax_probs(w + shift, x)
        assert np.abs(p1 - p2).max() <= 1e-12


class TestLossAndGrad:
    def test_zero_weights_log_c(self):
        x, y, _ = random_instance(4)
        loss, _ = mlr_loss_and_grad(np.zeros((3, 4)), x, y)
        assert loss == pytest.approx(np.log(3.0), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        x, y, w = random_instance(5)
        _, grad = mlr_loss_and_grad(w, x, y)
        fd = central_diff(lambda v: mlr_loss_and_grad(v, x, y)[0], w, step=1e-6)
        assert np.abs(fd - grad).max() <= 1e-6

    def test_confident_predictions_tiny_loss(self):
        # logits with margin 20 in favor of the true class
        c = 3
        y = one_hot([0, 1, 2, 1], c)
        x = 20.0 * y  # m = c features
        w = np.eye(c)
        loss, _ = mlr_loss_and_grad(w, x, y)
        assert 0.0 <= loss < 1e-3

    def test_loss_nonnegative(self):
        for seed in range(10):
            x, y, w = random_instance(seed)
            loss, _ = mlr_loss_and_grad(w, x, y)
            assert loss >= 0.0

    def test_shape_mismatch(self):
        x, y, _ = random_instance(6)
        with pytest.raises(InvalidInputError):
            mlr_loss_and_grad(np.zeros((3, 5)), x, y)

    def test_bad_one_hot(self):
        x, y, w = random_instance(7)
        y[0] = 0.5
        with pytest.raises(InvalidInputError):
            mlr_loss_and_grad(w, x, y)


class TestObjective:
    def test_lambda_zero_equals_loss(self):
        x, y, w = random_instance(8)
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("coupled", 0.0))
        loss, grad = mlr_loss_and_grad(w, x, y)
        value, g = objective_value_and_grad(w, obj)
        assert value == loss
        np.testing.assert_array_equal(g, grad)

    def test_coupled_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((4, 6))  # full row rank
        y = one_hot(rng.integers(0, 3, size=4), 3)
        w = rng.standard_normal((3, 6))
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("coupled", 0.3))
        _, grad = objective_value_and_grad(w, obj)
        fd = central_diff(
            lambda v: objective_value_and_grad(v, obj)[0], w, step=1e-5
        )
        assert np.abs(fd - grad).max() <= 1e-5

    def test_tikhonov_at_zero(self):
        x, y, _ = random_instance(10)
        w0 = np.zeros((3, 4))
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("tikhonov", 0.7))
        value, grad = objective_value_and_grad(w0, obj)
        loss, lgrad = mlr_loss_and_grad(w0, x, y)
        assert value == pytest.approx(np.log(3.0), abs=1e-12)
        np.testing.assert_allclose(grad, lgrad)

    @pytest.mark.parametrize("seed", range(50))
    def test_coupled_objective_midpoint_convexity(self, seed):
        rng = np.random.default_rng(4000 + seed)
        x = rng.standard_normal((8, 5))
        y = one_hot(rng.integers(0, 3, size=8), 3)
        obj = MlrObjective(x=x, y=y, reg=RegularizerSpec("coupled", 0.5))
        w1 = rng.standard_normal((3, 5))
        w2 = rng.standard_normal((3, 5))
        t = rng.uniform()
        lhs, _ = objective_value_and_grad(t * w1 + (1 - t) * w2, obj)
        f1, _ = objective_value_and_grad(w1, obj)
        f2, _ = objective_value_and_grad(w2, obj)
        assert lhs <= t * f1 + (1 - t) * f2 + 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_consistency_property(self, seed):
        rng = np.random.default_rng(5000 + seed)
        x = rng.standard_normal((6, 4))
        y = one_hot(rng.integers(0, 3, size=6), 3)
        w = rng.standard_normal((3, 4))
        for kind, lam in (("coupled", 0.2), ("tikhonov", 0.4), ("l2", 0.3)):
            obj = MlrObjective(x=x, y=y, reg=RegularizerSpec(kind, lam))
            _, grad = objective_value_and_grad(w, obj)
            fd = central_diff(lambda v: objective_value_and_grad(v, obj)[0], w)
            assert np.abs(fd - grad).max() <= 1e-5


class TestPredict:
    def test_zero_weights_tiebreak_lowest(self):
        x, _, _ = random_instance(11)
        np.testing.assert_array_equal(predict(np.zeros((3, 4)), x), np.zeros(10, dtype=int))

    def test_unique_maxima(self):
        w = np.eye(3)
        x = np.array([[0.0, 5.0, 1.0], [9.0, 0.0, 0.0], [0.0, 1.0, 2.0]])
        np.testing.assert_array_equal(predict(w, x), [1, 0, 2])

    def test_converged_separable_fit(self):
        x, y = separable_blobs(12, n_per_class=20)
        w, _ = fit(x, y, RegularizerSpec("none"))
        assert accuracy(w, x, y) >= 0.99
