import numpy as np
import pytest

from warpski.exceptions import DimensionMismatchError
from warpski.grids import grid_covering_box
from warpski.kernels import (Periodic, Product, QuasiPeriodic,
                             SquaredExponential)
from warpski.operators import (MixtureOperator, build_component,
                               decompose_separable, warp_points)
from warpski.warping import ElementwiseWarp, Identity, Polynomial1D


def _warped_setup(n=300, m=512, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    poly = Polynomial1D([2.0, 0.0, 1.0], domain=(-1.2, 1.2))
    grid = grid_covering_box([(float(poly.forward(-1.0)),
                               float(poly.forward(1.0)))], [m])
    kernel = SquaredExponential(1.5, 0.4)
    return x, poly, grid, kernel


class TestDecomposeSeparable:
    def test_1d_kernel_passes_through(self):
        k = SquaredExponential(1.0, 0.5)
        [(kd, idx)] = decompose_separable(k, 1)
        assert kd is k
        assert idx == [0, 1]

    def test_2d_product_splits_by_dimension(self):
        k = Product([SquaredExponential(1.5, 0.4),
                     SquaredExponential(1.0, 0.9)], dims=[0, 1])
        parts = decompose_separable(k, 2)
        assert len(parts) == 2
        assert parts[0][1] == [0, 1]
        assert parts[1][1] == [2, 3]

    def test_quasiperiodic_stays_on_one_axis(self):
        k = QuasiPeriodic(1.2, 5.0, 0.6, 2.0)
        [(kd, idx)] = decompose_separable(k, 1)
        assert idx == [0, 1, 2, 3, 4]

    def test_arity_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            decompose_separable(SquaredExponential(1.0, 0.5), 2)


class TestWarpPoints:
    def test_1d(self):
        poly = Polynomial1D([2.0, 0.0, 1.0], domain=(-2.0, 2.0))
        x = np.array([0.0, 0.5])
        np.testing.assert_allclose(warp_points(poly, x, 1),
                                   2 * x ** 3 + x, rtol=1e-15)

    def test_2d_elementwise(self):
        poly = Polynomial1D([2.0, 0.0, 1.0], domain=(-2.0, 2.0))
        w = ElementwiseWarp([poly, Identity()])
        x = np.array([[0.5, -1.0]])
        z = warp_points(w, x, 2)
        np.testing.assert_allclose(z, [[2 * 0.125 + 0.5, -1.0]], rtol=1e-14)


class TestSkiComponent:
    def test_matvec_matches_dense_ski(self):
        x, poly, grid, kernel = _warped_setup()
        comp = build_component(kernel, poly, grid, x)
        rng = np.random.default_rng(1)
        v = rng.normal(size=x.size)
        np.testing.assert_allclose(comp.matvec(v), comp.dense_ski() @ v,
                                   rtol=1e-10, atol=1e-12)

    def test_ski_close_to_exact_warped_kernel(self):
        x, poly, grid, kernel = _warped_setup(m=1024)
        comp = build_component(kernel, poly, grid, x)
        exact = comp.dense_exact(x)
        err = np.linalg.norm(comp.dense_ski() - exact) / np.linalg.norm(exact)
        assert err < 1e-4

    def test_construction_paths_produce_identical_weights(self):
        x, poly, grid, kernel = _warped_setup()
        a = build_component(kernel, poly, grid, x, construction="warp-points")
        b = build_component(kernel, poly, grid, x, construction="warp-grid")
        assert abs(a.weights.matrix - b.weights.matrix).max() <= 1e-12

    def test_unknown_construction_raises(self):
        x, poly, grid, kernel = _warped_setup()
        with pytest.raises(ValueError):
            build_component(kernel, poly, grid, x, construction="bogus")

    def test_derivative_matvec_matches_dense_fd(self):
        x, poly, grid, kernel = _warped_setup(n=150, m=256)
        comp = build_component(kernel, poly, grid, x)
        rng = np.random.default_rng(2)
        v = rng.normal(size=x.size)
        eps = 1e-6
        for p in range(kernel.n_params):
            lp = kernel.log_params.copy()
            lp[p] += eps
            up = build_component(kernel.with_log_params(lp), poly, grid, x)
            lp[p] -= 2 * eps
            dn = build_component(kernel.with_log_params(lp), poly, grid, x)
            fd = (up.dense_ski() - dn.dense_ski()) @ v / (2 * eps)
            got = comp.derivative_matvec(p, v)
            np.testing.assert_allclose(got, fd, rtol=1e-5, atol=1e-8)


class TestMixtureOperator:
    def _mixture(self, n=200):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.0, 1.0, n)
        grid = grid_covering_box([(-1.0, 1.0)], [128])
        comps = [build_component(SquaredExponential(1.0, 0.3), Identity(),
                                 grid, x),
                 build_component(Periodic(0.7, 0.8, 0.9), Identity(),
                                 grid, x)]
        return MixtureOperator(comps, 0.04, n), x

    def test_matvec_matches_dense(self):
        op, x = self._mixture()
        rng = np.random.default_rng(4)
        v = rng.normal(size=x.size)
        np.testing.assert_allclose(op.matvec(v), op.dense() @ v,
                                   rtol=1e-10, atol=1e-12)

    def test_matvec_no_noise_omits_diagonal(self):
        op, x = self._mixture()
        rng = np.random.default_rng(5)
        v = rng.normal(size=x.size)
        np.testing.assert_allclose(op.matvec(v) - op.matvec_no_noise(v),
                                   0.04 * v, rtol=1e-10, atol=1e-14)

    def test_param_layout_kernels_then_noise(self):
        op, _ = self._mixture()
        assert op.n_params == 2 + 3 + 1
        assert op.param_owner(0) == ("component", 0, 0)
        assert op.param_owner(2) == ("component", 1, 0)
        assert op.param_owner(5) == ("noise",)

    def test_noise_derivative_is_twice_variance(self):
        op, x = self._mixture()
        v = np.ones(x.size)
        np.testing.assert_allclose(op.derivative_matvec(op.n_params - 1, v),
                                   2 * 0.04 * v, rtol=1e-14)

    def test_operator_is_symmetric(self):
        op, x = self._mixture()
        rng = np.random.default_rng(6)
        u = rng.normal(size=x.size)
        v = rng.normal(size=x.size)
        assert u @ op.matvec(v) == pytest.approx(v @ op.matvec(u), rel=1e-10)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            MixtureOperator([], -1.0, 10)
