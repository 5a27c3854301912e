"""Regularizer values and (sub)gradients.

The data-coupled term ``g(xi) = ||[X, xi]||_*`` on a feature block and a
model-output block, its specialization ``R(W) = ||[X, X W^T]||_*`` for a
linear model with closed-form gradient ``V2 S V1^T``, a Lipschitz-constant
estimate for that gradient, and the l1 / l2 / Tikhonov baselines.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, NumericalError
from .linalg import DEFAULT_RANK_TOLERANCE, _as_matrix, numerical_rank

REGULARIZER_KINDS = ("none", "l1", "l2", "tikhonov", "coupled")

SIGMA_MIN_TOLERANCE = 1e-10


@dataclass(frozen=True)
class RegularizerSpec:
    """Which regularizer to apply and with what weight.

    ``kind`` is one of ``none``, ``l1``, ``l2``, ``tikhonov``, ``coupled``;
    ``lam`` is the nonnegative weight (ignored, treated as 0, for ``none``).
    """

    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise InvalidInputError(
                f"unknown regularizer kind {self.kind!r}; expected one of {REGULARIZER_KINDS}"
            )
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidInputError("regularizer weight must be finite and >= 0")

    @property
    def weight(self):
        """Effective weight: 0 for kind 'none', else lam."""
        return 0.0 if self.kind == "none" else float(self.lam)


@dataclass(frozen=True)
class ConcatSubgradient:
    """Value and minimal-norm subgradient of ``g(xi) = ||[X, xi]||_*``."""

    value: float
    subgrad: np.ndarray


def _concat_svd(concat, m, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """One SVD of the materialized concatenation, split for reuse.

    Returns ``(value, u, s, v1, v2)`` where ``value`` is the exact nuclear
    norm (sum over the full spectrum), the factors are truncated to the
    numerical rank, ``v1`` holds the first *m* rows of V and ``v2`` the rest.
    """
    try:
        u, s, vt = np.linalg.svd(concat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    value = float(s.sum())
    r = numerical_rank(s, rank_tolerance)
    v = vt[:r].T
    return value, u[:, :r], s[:r], v[:m], v[m:]


def concat_value_and_subgrad(x, xi):
    """Value and subgradient of the row-concatenation function ``g``.

    Parameters
    ----------
    x : array_like, shape (n, m)
    xi : array_like, shape (n, c)

    Returns
    -------
    ConcatSubgradient
        ``value = ||[x, xi]||_*`` and ``subgrad = U V2^T`` (the minimal-norm
        element, ``Z = 0``), where ``V2`` is the last *c* rows of V from the
        thin SVD of the concatenation.  The subgradient satisfies
        ``g(xi') >= g(xi) + <subgrad, xi' - xi>`` for every ``xi'``.
    """
    x = _as_matrix(x, "x")
    xi = _as_matrix(xi, "xi")
    if x.shape[0] != xi.shape[0]:
        raise InvalidInputError(
            f"row mismatch: x has {x.shape[0]} rows, xi has {xi.shape[0]}"
        )
    value, u, _, _, v2 = _concat_svd(np.hstack((x, xi)), x.shape[1])
    return ConcatSubgradient(value=value, subgrad=u @ v2.T)


def coupled_reg_mlr(x, w):
    """Coupled regularizer of a linear model: value and exact gradient.

    ``R(w) = ||[x, x w^T]||_*`` is differentiable in *w* with gradient
    ``V2 S V1^T``, where ``U S V^T`` is the thin SVD of the concatenation,
    ``V1`` is the first *m* rows of V and ``V2`` the last *c* rows.

    Parameters
    ----------
    x : array_like, shape (n, m)
    w : array_like, shape (c, m)

    Returns
    -------
    (float, ndarray)
        The value and the ``(c, m)`` gradient.
    """
    x = _as_matrix(x, "x")
    w = _as_matrix(w, "w")
    if w.shape[1] != x.shape[1]:
        raise InvalidInputError(
            f"shape mismatch: x has {x.shape[1]} columns, w has {w.shape[1]}"
        )
    value, _, s, v1, v2 = _concat_svd(np.hstack((x, x @ w.T)), x.shape[1])
    grad = (v2 * s) @ v1.T
    return value, grad


def coupled_reg_mlr_gram(x, w, gram=None):
    """Gram-matrix route to :func:`coupled_reg_mlr` for large sweeps.

    Computes S and V from the eigendecomposition of ``M^T M`` for
    ``M = [x, x w^T]`` instead of an SVD of M, which is markedly faster
    when n is large.  Taking square roots of eigenvalues costs accuracy:
    value and gradient agree with the exact route to about
    ``1e-6 * sigma_max``, which is ample for optimization but not for
    finite-difference checks; use :func:`coupled_reg_mlr` for those.

    ``gram`` optionally carries a precomputed ``x.T @ x``.
    """
    x = _as_matrix(x, "x")
    w = _as_matrix(w, "w")
    if w.shape[1] != x.shape[1]:
        raise InvalidInputError(
            f"shape mismatch: x has {x.shape[1]} columns, w has {w.shape[1]}"
        )
    m = x.shape[1]
    g = x.T @ x if gram is None else gram
    gw = g @ w.T
    mtm = np.block([[g, gw], [gw.T, w @ gw]])
    try:
        eigvals, eigvecs = np.linalg.eigh(mtm)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    s = np.sqrt(np.clip(eigvals[::-1], 0.0, None))
    v = eigvecs[:, ::-1]
    value = float(s.sum())
    r = numerical_rank(s, DEFAULT_RANK_TOLERANCE)
    s, v = s[:r], v[:, :r]
    grad = (v[m:] * s) @ v[:m].T
    return value, grad


def estimate_lipschitz(x, w, w_hat):
    """Lipschitz bound for the coupled-regularizer gradient vs. the observed ratio.

    Returns ``(bound, observed)`` with
    ``bound = lambda_max(x^T x) / sigma_min(E)`` for
    ``E = [w x^T, w_hat x^T]`` (horizontal concatenation) and
    ``observed = ||grad R(w) - grad R(w_hat)||_F / ||w - w_hat||_F``.

    Raises
    ------
    InvalidInputError
        If ``w == w_hat`` (the observed ratio is undefined).
    DegenerateInputError
        If ``sigma_min(E)`` vanishes, i.e. the bound's assumption fails.
    """
    x = _as_matrix(x, "x")
    w = _as_matrix(w, "w")
    w_hat = _as_matrix(w_hat, "w_hat")
    if w.shape != w_hat.shape or w.shape[1] != x.shape[1]:
        raise InvalidInputError("w, w_hat must share shape (c, m) compatible with x")
    dist = float(np.linalg.norm(w - w_hat))
    if dist == 0.0:
        raise InvalidInputError("w and w_hat must differ")
    e = np.hstack((w @ x.T, w_hat @ x.T))
    sigma_e = np.linalg.svd(e, compute_uv=False)
    sigma_min = float(sigma_e[-1]) if sigma_e.size else 0.0
    if sigma_min <= SIGMA_MIN_TOLERANCE:
        raise DegenerateInputError(
            f"sigma_min(E) = {sigma_min:.3e} is numerically zero; the Lipschitz"
            " bound's nonzero-singular-value assumption fails"
        )
    sigma_x = np.linalg.svd(x, compute_uv=False)
    lam_max = float(sigma_x[0] ** 2) if sigma_x.size else 0.0
    bound = lam_max / sigma_min
    _, g1 = coupled_reg_mlr(x, w)
    _, g2 = coupled_reg_mlr(x, w_hat)
    observed = float(np.linalg.norm(g1 - g2)) / dist
    return bound, observed


def baseline_reg(w, spec):
    """Value and subgradient of a baseline regularizer at *w*.

    ``none``:     (0, 0)
    ``l1``:       entrywise 1-norm, subgradient ``sign(w)`` with sign(0) = 0
    ``l2``:       Frobenius norm (unsquared), subgradient ``w / ||w||_F`` (0 at 0)
    ``tikhonov``: ``0.5 ||w||_F^2``, gradient ``w``
    """
    w = _as_matrix(w, "w")
    if spec.kind == "coupled":
        raise InvalidInputError(
            "coupled regularizer needs the data matrix; use coupled_reg_mlr"
        )
    if spec.kind == "none":
        return 0.0, np.zeros_like(w)
    if spec.kind == "l1":
        return float(np.abs(w).sum()), np.sign(w)
    if spec.kind == "l2":
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0, np.zeros_like(w)
        return norm, w / norm
    # tikhonov
    return 0.5 * float(np.sum(w * w)), w.copy()
