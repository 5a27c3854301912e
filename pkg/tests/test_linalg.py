"""Tests for the dense linear-algebra kernels."""

import numpy as np
import pytest

from ctnreg.errors import InvalidInputError, InvalidModeError
from ctnreg.linalg import (
    coupled_tensor_norm,
    mode_n_fold,
    mode_n_unfold,
    nuclear_norm,
    nuclear_norm_subgrad,
    thin_svd,
)


def unfold_oracle(t, n):
    """Brute-force unfolding: place each entry by enumerating multi-indices.

    The column index accumulates the remaining modes with the lowest mode
    varying fastest.
    """
    t = np.asarray(t, dtype=float)
    rest = [ax for ax in range(t.ndim) if ax != n - 1]
    cols = int(np.prod([t.shape[ax] for ax in rest])) if rest else 1
    out = np.zeros((t.shape[n - 1], cols))
    for idx in np.ndindex(*t.shape):
        col, mult = 0, 1
        for ax in rest:
            col += idx[ax] * mult
            mult *= t.shape[ax]
        out[idx[n - 1], col] = t[idx]
    return out


def cube_tensor():
    """2x2x2 tensor with entry(i,j,k) = i + 2(j-1) + 4(k-1), 1-based."""
    t = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                t[i, j, k] = (i + 1) + 2 * j + 4 * k
    return t


class TestThinSvd:
    def test_identity(self):
        f = thin_svd(np.eye(2))
        assert f.rank == 2
        np.testing.assert_allclose(f.singulars, [1.0, 1.0])

    def test_rank_deficient_diagonal(self):
        f = thin_svd(np.diag([3.0, 0.0]), rank_tolerance=1e-12)
        assert f.rank == 1
        np.testing.assert_allclose(f.singulars, [3.0])

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((4, 3))
        f = thin_svd(a)
        err = np.linalg.norm(f.reconstruct() - a)
        assert err <= 1e-8 * np.linalg.norm(a)

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_and_orthonormality_property(self, seed):
        rng = np.random.default_rng(seed)
        n, p = rng.integers(1, 8, size=2)
        a = rng.standard_normal((n, p)) * rng.uniform(0.1, 10.0)
        f = thin_svd(a)
        assert np.linalg.norm(f.reconstruct() - a) <= 1e-8 * max(np.linalg.norm(a), 1e-30)
        tol = 1e-10 * max(n, p)
        assert np.abs(f.u.T @ f.u - np.eye(f.rank)).max() <= tol
        assert np.abs(f.v.T @ f.v - np.eye(f.rank)).max() <= tol
        assert np.all(np.diff(f.singulars) <= 0)
        if f.rank:
            assert np.all(f.singulars > f.rank_tolerance * f.singulars[0])

    def test_zero_matrix(self):
        f = thin_svd(np.zeros((3, 2)))
        assert f.rank == 0
        assert f.u.shape == (3, 0) and f.v.shape == (2, 0)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            thin_svd(np.array([[1.0, np.nan], [0.0, 1.0]]))
        with pytest.raises(InvalidInputError):
            thin_svd(np.array([[np.inf, 0.0]]))

    def test_negative_tolerance_rejected(self):
        with pytest.raises(InvalidInputError):
            thin_svd(np.eye(2), rank_tolerance=-1e-3)


class TestNuclearNorm:
    def test_identity(self):
        assert nuclear_norm(np.eye(2)) == pytest.approx(2.0)

    def test_diagonal_absolute_values(self):
        assert nuclear_norm(np.array([[3.0, 0.0], [0.0, -4.0]])) == pytest.approx(7.0)

    def test_eigenvalue_oracle(self):
        # independent oracle: sum of sqrt eigenvalues of a^T a
        rng = np.random.default_rng(11)
        a = rng.standard_normal((5, 3))
        eigs = np.linalg.eigvalsh(a.T @ a)
        oracle = np.sqrt(np.clip(eigs, 0.0, None)).sum()
        assert nuclear_norm(a) == pytest.approx(oracle, rel=1e-8)

    @pytest.mark.parametrize("seed", range(50))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(1000 + seed)
        a = rng.standard_normal((4, 5))
        b = rng.standard_normal((4, 5))
        assert nuclear_norm(a + b) <= nuclear_norm(a) + nuclear_norm(b) + 1e-10

    def test_zero_padding_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 3))
        padded = np.hstack((a, np.zeros((4, 2))))
        assert nuclear_norm(padded) == pytest.approx(nuclear_norm(a), abs=1e-10)


class TestNuclearNormSubgrad:
    def test_identity(self):
        np.testing.assert_allclose(nuclear_norm_subgrad(np.eye(2)), np.eye(2))

    def test_zero_matrix(self):
        np.testing.assert_array_equal(nuclear_norm_subgrad(np.zeros((3, 2))),
                                      np.zeros((3, 2)))

    def test_convexity_inequality(self):
        rng = np.random.default_rng(21)
        a = rng.standard_normal((4, 4))
        g = nuclear_norm_subgrad(a)
        na = nuclear_norm(a)
        for _ in range(20):
            b = rng.standard_normal((4, 4)) * rng.uniform(0.1, 5.0)
            slack = nuclear_norm(b) - na - np.sum(g * (b - a))
            assert slack >= -1e-9


class TestUnfoldFold:
    def test_matrix_mode1_is_identity(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(mode_n_unfold(a, 1), a)

    def test_cube_mode1_against_oracle_and_frozen(self):
        t = cube_tensor()
        got = mode_n_unfold(t, 1)
        np.testing.assert_array_equal(got, unfold_oracle(t, 1))
        np.testing.assert_array_equal(got, [[1, 3, 5, 7], [2, 4, 6, 8]])

    def test_cube_mode3_against_oracle_and_frozen(self):
        t = cube_tensor()
        got = mode_n_unfold(t, 3)
        np.testing.assert_array_equal(got, unfold_oracle(t, 3))
        np.testing.assert_array_equal(got, [[1, 2, 3, 4], [5, 6, 7, 8]])

    @pytest.mark.parametrize("shape", [(2,), (3, 2), (2, 2, 2), (5, 1, 3), (2, 3, 4, 5)])
    def test_oracle_agreement_all_modes(self, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        t = rng.standard_normal(shape)
        for n in range(1, len(shape) + 1):
            np.testing.assert_array_equal(mode_n_unfold(t, n), unfold_oracle(t, n))

    @pytest.mark.parametrize("shape", [(2,), (3, 2), (2, 2, 2), (5, 1, 3), (2, 3, 4, 5)])
    def test_round_trip_exact(self, shape):
        rng = np.random.default_rng(len(shape))
        t = rng.standard_normal(shape)
        for n in range(1, len(shape) + 1):
            back = mode_n_fold(mode_n_unfold(t, n), n, shape)
            np.testing.assert_array_equal(back, t)

    def test_fold_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            mode_n_fold(np.zeros((2, 4)), 1, (2, 3))

    def test_mode_out_of_range(self):
        t = cube_tensor()
        for n in (0, 4, -1):
            with pytest.raises(InvalidModeError):
                mode_n_unfold(t, n)
        with pytest.raises(InvalidModeError):
            mode_n_fold(np.zeros((2, 4)), 5, (2, 2, 2))


class TestCoupledTensorNorm:
    def test_zero_coupling_matrix(self):
        t = cube_tensor()
        a = np.zeros((2, 3))
        expected = sum(nuclear_norm(mode_n_unfold(t, i)) for i in (1, 2, 3))
        assert coupled_tensor_norm(t, a, 1) == pytest.approx(expected, rel=1e-12)

    def test_two_way_empty_coupling(self):
        rng = np.random.default_rng(9)
        t = rng.standard_normal((3, 4))
        a = np.zeros((3, 0))
        expected = nuclear_norm(t) + nuclear_norm(t.T)
        assert coupled_tensor_norm(t, a, 1) == pytest.approx(expected, rel=1e-12)
        assert coupled_tensor_norm(t, a, 1) == pytest.approx(2 * nuclear_norm(t), rel=1e-12)

    def test_composed_from_verified_parts(self):
        rng = np.random.default_rng(13)
        t = rng.standard_normal((3, 3, 3))
        a = rng.standard_normal((3, 2))
        expected = nuclear_norm(np.hstack((mode_n_unfold(t, 1), a)))
        expected += nuclear_norm(mode_n_unfold(t, 2))
        expected += nuclear_norm(mode_n_unfold(t, 3))
        assert coupled_tensor_norm(t, a, 1) == pytest.approx(expected, rel=1e-12)

    def test_general_mode_coupling(self):
        rng = np.random.default_rng(14)
        t = rng.standard_normal((2, 3, 4))
        a = rng.standard_normal((3, 2))
        expected = nuclear_norm(np.hstack((mode_n_unfold(t, 2), a)))
        expected += nuclear_norm(mode_n_unfold(t, 1))
        expected += nuclear_norm(mode_n_unfold(t, 3))
        assert coupled_tensor_norm(t, a, 2) == pytest.approx(expected, rel=1e-12)

    def test_row_mismatch(self):
        with pytest.raises(InvalidInputError):
            coupled_tensor_norm(cube_tensor(), np.zeros((3, 2)), 1)
