"""Multinomial logistic regression.

Softmax probabilities, the cross-entropy loss with its exact gradient, the
regularized objective ``G(W) = L(W) + lam * R(W)``, prediction, and a
convergence-criteria-preconfigured ``fit`` built on the solvers in
:mod:`ctnreg.optim`.
"""

from dataclasses import dataclass

import numpy as np

from . import optim
from .errors import InvalidInputError, NumericalError
from .linalg import _as_matrix
from .regularizers import (
    RegularizerSpec,
    baseline_reg,
    coupled_reg_mlr,
    coupled_reg_mlr_gram,
)


def _check_one_hot(y):
    y = _as_matrix(y, "y")
    if y.shape[1] < 2:
        raise InvalidInputError("need at least 2 classes")
    ok = np.all((y == 0.0) | (y == 1.0)) and np.all(y.sum(axis=1) == 1.0)
    if not ok:
        raise InvalidInputError("y rows must be one-hot vectors")
    return y


@dataclass(frozen=True)
class MlrObjective:
    """Dataset plus regularizer defining ``G(W) = L(W) + lam * R(W)``."""

    x: np.ndarray
    y: np.ndarray
    reg: RegularizerSpec

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = _check_one_hot(self.y)
        if x.shape[0] != y.shape[0] or x.shape[0] < 1:
            raise InvalidInputError("x and y must have the same positive row count")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def softmax_probs(w, x):
    """Class probabilities ``P[i, k] = exp(w_k . x_i) / sum_j exp(w_j . x_i)``.

    Stabilized by per-row max-logit subtraction; every row sums to 1.
    """
    w = _as_matrix(w, "w")
    x = _as_matrix(x, "x")
    z = x @ w.T
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(p)):
        raise NumericalError("softmax produced non-finite probabilities")
    return p


def softmax_cross_entropy(logits, y):
    """Mean cross-entropy of softmax(logits) against one-hot *y*.

    Returns ``(loss, dlogits)`` where ``dlogits = (P - Y) / n`` is the
    gradient with respect to the logits.
    """
    z = np.asarray(logits, dtype=float)
    n = z.shape[0]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    loss = float(np.mean(lse - (z * y).sum(axis=1)))
    p = np.exp(z - zmax)
    p /= p.sum(axis=1, keepdims=True)
    return loss, (p - y) / n


def mlr_loss_and_grad(w, x, y):
    """Negative mean log-likelihood ``L(W)`` and its gradient ``(P - Y)^T X / n``."""
    w = _as_matrix(w, "w")
    x = _as_matrix(x, "x")
    y = _check_one_hot(y)
    if x.shape[0] != y.shape[0] or w.shape != (y.shape[1], x.shape[1]):
        raise InvalidInputError(
            f"shape mismatch: x {x.shape}, y {y.shape}, w {w.shape}"
        )
    loss, dlogits = softmax_cross_entropy(x @ w.T, y)
    return loss, dlogits.T @ x


def objective_value_and_grad(w, obj):
    """Value and gradient (subgradient for l1) of the regularized objective."""
    loss, grad = mlr_loss_and_grad(w, obj.x, obj.y)
    lam = obj.reg.weight
    if lam == 0.0:
        return loss, grad
    if obj.reg.kind == "coupled":
        rval, rgrad = coupled_reg_mlr(obj.x, w)
    else:
        rval, rgrad = baseline_reg(w, obj.reg)
    return loss + lam * rval, grad + lam * rgrad


def predict(w, x):
    """Class indices by row-wise argmax of the logits; ties go to the lowest index."""
    w = _as_matrix(w, "w")
    x = _as_matrix(x, "x")
    return np.argmax(x @ w.T, axis=1)


def accuracy(w, x, y):
    """Fraction of rows whose predicted class matches the one-hot label."""
    return float(np.mean(predict(w, x) == np.argmax(y, axis=1)))


def fit(x, y, reg, *, max_iters=2000, step_tol=1e-4, grad_tol=1e-4, wolfe=None,
        fast_gram=False):
    """Train MLR from ``W = 0`` under the stopping rules used throughout.

    Smooth regularizers (none, l2 away from 0, tikhonov, coupled) are
    solved by Wolfe-linesearch gradient descent; the nonsmooth l1 penalty
    falls back to the 1/k-step subgradient method with best-iterate
    tracking.  Stops when the iterate change or gradient norm drops to
    1e-4, or after ``max_iters`` (default 2000) iterations.

    ``fast_gram`` switches the coupled regularizer to its Gram-matrix
    evaluation (see :func:`ctnreg.regularizers.coupled_reg_mlr_gram`) for
    big sweep workloads.

    Returns ``(w, report)``.
    """
    obj = MlrObjective(x=x, y=y, reg=reg)
    c, m = obj.y.shape[1], obj.x.shape[1]
    w0 = np.zeros((c, m))

    if fast_gram and reg.kind == "coupled" and reg.weight > 0.0:
        gram = obj.x.T @ obj.x
        lam = reg.weight

        def value_and_grad(w):
            loss, grad = mlr_loss_and_grad(w, obj.x, obj.y)
            rval, rgrad = coupled_reg_mlr_gram(obj.x, w, gram=gram)
            return loss + lam * rval, grad + lam * rgrad

    else:

        def value_and_grad(w):
            return objective_value_and_grad(w, obj)

    if reg.kind == "l1" and reg.weight > 0.0:
        return optim.subgradient_descent(
            value_and_grad, w0, grad_tol=grad_tol, max_iters=max_iters
        )
    cfg = optim.GdConfig(
        step_tol=step_tol, grad_tol=grad_tol, max_iters=max_iters, w0=w0
    )
    return optim.gradient_descent(value_and_grad, cfg, wolfe=wolfe)
