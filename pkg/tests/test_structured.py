import numpy as np
import pytest
import scipy.linalg

from warpski.exceptions import (DimensionMismatchError,
                                NotPositiveDefiniteError)
from warpski.structured import (KronEigen, KronOperator, SymToeplitz,
                                kron_matvec, toeplitz_matvec)


class TestSymToeplitz:
    def test_matvec_matches_dense_across_sizes(self):
        rng = np.random.default_rng(0)
        for m in [1, 2, 3, 5, 17, 64, 127, 256]:
            col = rng.normal(size=m)
            op = SymToeplitz(col)
            v = rng.normal(size=m)
            want = scipy.linalg.toeplitz(col) @ v
            np.testing.assert_allclose(op.matvec(v), want,
                                       rtol=1e-12, atol=1e-12)

    def test_matmat_applies_columnwise(self):
        rng = np.random.default_rng(1)
        col = rng.normal(size=40)
        op = SymToeplitz(col)
        v = rng.normal(size=(40, 7))
        want = scipy.linalg.toeplitz(col) @ v
        np.testing.assert_allclose(op.matmat(v), want, rtol=1e-12, atol=1e-12)

    def test_dense_is_symmetric_toeplitz(self):
        col = np.array([3.0, 1.0, 0.5, 0.1])
        d = SymToeplitz(col).dense()
        np.testing.assert_array_equal(d, d.T)
        np.testing.assert_array_equal(np.diag(d), np.full(4, 3.0))

    def test_length_mismatch_raises(self):
        op = SymToeplitz(np.ones(5))
        with pytest.raises(DimensionMismatchError):
            op.matvec(np.ones(6))

    def test_functional_wrapper(self):
        rng = np.random.default_rng(2)
        col = rng.normal(size=12)
        v = rng.normal(size=12)
        op = SymToeplitz(col)
        np.testing.assert_array_equal(toeplitz_matvec(op, v), op.matvec(v))


class TestKronOperator:
    @pytest.mark.parametrize("shapes", [(6,), (4, 5), (3, 4, 2)])
    def test_matvec_matches_dense(self, shapes):
        rng = np.random.default_rng(3)
        factors = [SymToeplitz(rng.normal(size=m)) for m in shapes]
        op = KronOperator(factors)
        v = rng.normal(size=op.shape[0])
        np.testing.assert_allclose(op.matvec(v), op.dense() @ v,
                                   rtol=1e-12, atol=1e-12)

    def test_index_order_is_last_dimension_fastest(self):
        # with A (2x2) and B (3x3), entry layout must follow np.kron(A, B)
        a = np.array([[1.0, 0.0], [0.0, 2.0]])
        b = np.diag([1.0, 10.0, 100.0])
        op = KronOperator([a, b])
        v = np.arange(6, dtype=float)
        np.testing.assert_allclose(op.matvec(v), np.kron(a, b) @ v,
                                   rtol=1e-14)

    def test_matrix_operand(self):
        rng = np.random.default_rng(4)
        factors = [SymToeplitz(rng.normal(size=m)) for m in (4, 6)]
        op = KronOperator(factors)
        v = rng.normal(size=(24, 5))
        np.testing.assert_allclose(op.matmat(v), op.dense() @ v,
                                   rtol=1e-12, atol=1e-12)

    def test_functional_wrapper(self):
        rng = np.random.default_rng(5)
        factors = [SymToeplitz(rng.normal(size=m)) for m in (3, 4)]
        v = rng.normal(size=12)
        np.testing.assert_array_equal(kron_matvec(factors, v),
                                      KronOperator(factors).matvec(v))

    def test_rejects_empty_factor_list(self):
        with pytest.raises(DimensionMismatchError):
            KronOperator([])


def _spd_toeplitz(rng, m):
    # SE-type column gives a positive definite Toeplitz matrix
    lags = np.arange(m, dtype=float)
    return SymToeplitz(np.exp(-0.5 * (lags / (0.15 * m)) ** 2))


class TestKronEigen:
    def test_solve_matches_dense(self):
        rng = np.random.default_rng(6)
        factors = [_spd_toeplitz(rng, 10), _spd_toeplitz(rng, 12)]
        eig = KronEigen(factors)
        dense = KronOperator(factors).dense()
        y = rng.normal(size=120)
        sigma2 = 0.3
        want = np.linalg.solve(dense + sigma2 * np.eye(120), y)
        np.testing.assert_allclose(eig.solve(sigma2, y), want,
                                   rtol=1e-9, atol=1e-10)

    def test_logdet_matches_dense(self):
        rng = np.random.default_rng(7)
        factors = [_spd_toeplitz(rng, 9), _spd_toeplitz(rng, 11)]
        eig = KronEigen(factors)
        dense = KronOperator(factors).dense()
        sigma2 = 0.5
        want = float(np.linalg.slogdet(dense + sigma2 * np.eye(99))[1])
        assert eig.logdet(sigma2) == pytest.approx(want, rel=1e-10)

    def test_sqrt_operator_squares_to_matrix(self):
        rng = np.random.default_rng(8)
        factors = [_spd_toeplitz(rng, 8), _spd_toeplitz(rng, 7)]
        eig = KronEigen(factors)
        root = eig.sqrt_operator()
        dense_root = root.dense()
        np.testing.assert_allclose(dense_root @ dense_root.T,
                                   KronOperator(factors).dense(),
                                   rtol=1e-8, atol=1e-10)

    def test_rejects_indefinite_factor(self):
        with pytest.raises(NotPositiveDefiniteError):
            KronEigen([np.diag([1.0, -1.0])])

    def test_zero_noise_with_singular_matrix_raises(self):
        eig = KronEigen([np.diag([1.0, 0.0])])
        with pytest.raises(NotPositiveDefiniteError):
            eig.solve(0.0, np.ones(2))
