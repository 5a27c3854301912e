"""Dense linear-algebra kernels.

Thin SVD with rank truncation, the nuclear norm and its minimal-norm
subgradient, mode-n tensor unfolding/folding, and the coupled tensor norm
of a tensor and a matrix sharing one mode.

Conventions
-----------
Matrices and tensors are ``numpy`` arrays of float64.  Tensor modes are
numbered 1..N (mode 1 is the first axis).  Unfoldings order their columns
so that the index of the lowest remaining mode varies fastest, matching
the Kronecker factor ordering ``U_N (x) ... (x) U_1``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidModeError, NumericalError

DEFAULT_RANK_TOLERANCE = 1e-12


def _as_matrix(a, name="a"):
    """Validate and return *a* as a finite 2-D float64 array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def _as_tensor(t, name="t"):
    """Validate and return *t* as a finite N-way float64 array, N >= 1."""
    t = np.asarray(t, dtype=float)
    if t.ndim < 1:
        raise InvalidInputError(f"{name} must have at least one mode")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return t


def numerical_rank(singulars, rank_tolerance):
    """Number of singular values above ``rank_tolerance * max(singulars)``."""
    s = np.asarray(singulars, dtype=float)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > rank_tolerance * s[0]))


@dataclass(frozen=True)
class ThinSvd:
    """Rank-truncated thin singular value decomposition ``a = u @ diag(s) @ v.T``.

    Attributes
    ----------
    u : ndarray, shape (n, r)
        Left singular vectors, orthonormal columns.
    singulars : ndarray, shape (r,)
        Retained singular values, descending and positive.
    v : ndarray, shape (p, r)
        Right singular vectors, orthonormal columns.
    rank_tolerance : float
        Relative threshold used to truncate the rank: values
        ``<= rank_tolerance * max singular value`` were dropped.
    """

    u: np.ndarray
    singulars: np.ndarray
    v: np.ndarray
    rank_tolerance: float

    @property
    def rank(self):
        return self.singulars.size

    def reconstruct(self):
        """Return ``u @ diag(singulars) @ v.T``."""
        return (self.u * self.singulars) @ self.v.T


def thin_svd(a, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Thin SVD of a matrix with relative rank truncation.

    Parameters
    ----------
    a : array_like, shape (n, p)
        Finite real matrix.
    rank_tolerance : float
        Nonnegative relative threshold; singular values
        ``<= rank_tolerance * sigma_max`` are discarded.

    Returns
    -------
    ThinSvd
        Truncated factors with ``rank`` = numerical rank of *a*.
    """
    a = _as_matrix(a)
    if rank_tolerance < 0:
        raise InvalidInputError("rank_tolerance must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    r = numerical_rank(s, rank_tolerance)
    return ThinSvd(
        u=np.ascontiguousarray(u[:, :r]),
        singulars=s[:r].copy(),
        v=np.ascontiguousarray(vt[:r].T),
        rank_tolerance=float(rank_tolerance),
    )


def nuclear_norm(a):
    """Nuclear norm: the sum of all singular values of *a*."""
    a = _as_matrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    return float(s.sum())


def nuclear_norm_subgrad(a, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Minimal-norm subgradient ``u @ v.T`` of the nuclear norm at *a*.

    The subdifferential at ``a = u diag(s) v.T`` is
    ``{u v.T + z | u.T z = 0, z v = 0, ||z||_2 <= 1}``; this routine makes
    the deterministic choice ``z = 0``.  For a zero matrix the thin SVD is
    empty and the zero matrix is returned.
    """
    f = thin_svd(a, rank_tolerance)
    if f.rank == 0:
        a = _as_matrix(a)
        return np.zeros_like(a)
    return f.u @ f.v.T


def mode_n_unfold(t, n):
    """Mode-n unfolding of an N-way tensor.

    Parameters
    ----------
    t : array_like
        Tensor with shape ``(I_1, ..., I_N)``.
    n : int
        Mode index, 1-based: ``1 <= n <= N``.

    Returns
    -------
    ndarray, shape (I_n, prod of the other mode sizes)
        Rows index mode *n*; the column index runs over the remaining
        modes with the lowest mode varying fastest.
    """
    t = _as_tensor(t)
    n = int(n)
    if not 1 <= n <= t.ndim:
        raise InvalidModeError(f"mode {n} out of range 1..{t.ndim}")
    return np.reshape(np.moveaxis(t, n - 1, 0), (t.shape[n - 1], -1), order="F")


def mode_n_fold(m, n, shape):
    """Inverse of :func:`mode_n_unfold`: rebuild the tensor of ``shape``."""
    m = _as_matrix(m, "m")
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape) or len(shape) < 1:
        raise InvalidInputError(f"invalid tensor shape {shape}")
    n = int(n)
    if not 1 <= n <= len(shape):
        raise InvalidModeError(f"mode {n} out of range 1..{len(shape)}")
    rest = shape[: n - 1] + shape[n:]
    expected = (shape[n - 1], int(np.prod(rest)) if rest else 1)
    if m.shape != expected:
        raise InvalidInputError(
            f"matrix shape {m.shape} inconsistent with tensor shape {shape} at mode {n};"
            f" expected {expected}"
        )
    return np.moveaxis(m.reshape((shape[n - 1],) + rest, order="F"), 0, n - 1)


def coupled_tensor_norm(t, a, n=1):
    """Coupled tensor norm of tensor *t* and matrix *a* sharing mode *n*.

    Computes ``||[X_(n), a]||_* + sum_{i != n} ||X_(i)||_*`` where
    ``[.,.]`` appends the columns of *a* to the mode-n unfolding, so *a*
    must have ``I_n`` rows.
    """
    t = _as_tensor(t)
    a = _as_matrix(a)
    n = int(n)
    if not 1 <= n <= t.ndim:
        raise InvalidModeError(f"mode {n} out of range 1..{t.ndim}")
    if a.shape[0] != t.shape[n - 1]:
        raise InvalidInputError(
            f"coupling matrix has {a.shape[0]} rows, mode {n} has size {t.shape[n - 1]}"
        )
    total = nuclear_norm(np.hstack((mode_n_unfold(t, n), a)))
    for i in range(1, t.ndim + 1):
        if i != n:
            total += nuclear_norm(mode_n_unfold(t, i))
    return total


def frobenius_norm(a):
    """Frobenius norm of an array of any shape."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))
