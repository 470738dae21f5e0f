import numpy as np
import pytest

from warpski.exceptions import NotPositiveDefiniteError
from warpski.krylov import (ProbeSet, cg_solve, lanczos, slq_logdet,
                            slq_logdet_with_factors, slq_nlml_gradient)


def _spd(rng, n, cond=10.0):
    a = rng.normal(size=(n, n))
    return a @ a.T / n + np.eye(n) / cond


class TestCgSolve:
    def test_solves_to_requested_tolerance(self):
        rng = np.random.default_rng(0)
        n = 80
        k = _spd(rng, n)
        y = rng.normal(size=n)
        rep = cg_solve(lambda v: k @ v, y, tol=1e-10)
        assert rep.converged
        err = np.linalg.norm(k @ rep.x - y) / np.linalg.norm(y)
        assert err <= 1e-10

    def test_reports_nonconvergence_on_budget_exhaustion(self):
        rng = np.random.default_rng(1)
        n = 100
        k = _spd(rng, n, cond=1e6)
        y = rng.normal(size=n)
        rep = cg_solve(lambda v: k @ v, y, tol=1e-14, max_iter=3)
        assert not rep.converged
        assert rep.iterations == 3

    def test_zero_rhs_returns_zero(self):
        rep = cg_solve(lambda v: v, np.zeros(5), tol=1e-8)
        assert rep.converged
        np.testing.assert_array_equal(rep.x, np.zeros(5))

    def test_warm_start(self):
        rng = np.random.default_rng(2)
        n = 60
        k = _spd(rng, n)
        y = rng.normal(size=n)
        x_star = np.linalg.solve(k, y)
        rep = cg_solve(lambda v: k @ v, y, tol=1e-12, x0=x_star)
        assert rep.converged
        assert rep.iterations == 0

    def test_energy_norm_error_decreases_monotonically(self):
        rng = np.random.default_rng(3)
        n = 70
        k = _spd(rng, n)
        y = rng.normal(size=n)
        x_star = np.linalg.solve(k, y)
        prev = np.inf
        for it in range(1, 25):
            e = cg_solve(lambda v: k @ v, y, tol=0.0, max_iter=it).x - x_star
            energy = float(e @ k @ e)
            assert energy <= prev + 1e-12
            prev = energy


class TestProbeSet:
    def test_same_seed_reproduces(self):
        a = ProbeSet.draw(50, 8, seed=7).vectors
        b = ProbeSet.draw(50, 8, seed=7).vectors
        np.testing.assert_array_equal(a, b)

    def test_entries_are_rademacher(self):
        v = ProbeSet.draw(200, 4, seed=0).vectors
        assert set(np.unique(v)) == {-1.0, 1.0}


class TestLanczos:
    def test_reproduces_operator_on_krylov_subspace(self):
        rng = np.random.default_rng(4)
        n = 50
        k = _spd(rng, n)
        f = lanczos(lambda v: k @ v, rng.normal(size=n), 20)
        q = f.basis
        t = np.diag(f.alphas) + np.diag(f.betas, 1) + np.diag(f.betas, -1)
        # orthonormal basis and T = Q^T K Q
        np.testing.assert_allclose(q.T @ q, np.eye(f.steps), atol=1e-10)
        np.testing.assert_allclose(q.T @ k @ q, t, atol=1e-8)

    def test_full_run_recovers_all_eigenvalues(self):
        rng = np.random.default_rng(5)
        n = 30
        k = _spd(rng, n)
        f = lanczos(lambda v: k @ v, rng.normal(size=n), n)
        vals, _ = f.ritz()
        np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(k),
                                   rtol=1e-8)

    def test_breakdown_truncates_on_invariant_subspace(self):
        # start vector inside a 2-dimensional invariant subspace
        k = np.diag([1.0, 2.0, 3.0, 4.0])
        v = np.array([1.0, 1.0, 0.0, 0.0])
        f = lanczos(lambda u: k @ u, v, 4)
        assert f.steps == 2
        vals, _ = f.ritz()
        np.testing.assert_allclose(np.sort(vals), [1.0, 2.0], atol=1e-12)

    def test_rejects_zero_start_vector(self):
        with pytest.raises(ValueError):
            lanczos(lambda v: v, np.zeros(5), 3)


class TestSlqLogdet:
    def test_single_seed_close_to_cholesky(self):
        rng = np.random.default_rng(6)
        n = 300
        a = rng.normal(size=(n, n))
        k = a @ a.T / n + np.eye(n)
        exact = float(np.linalg.slogdet(k)[1])
        est = slq_logdet(lambda v: k @ v, n, ProbeSet.draw(n, 20, 0), 30)
        assert abs(est - exact) / abs(exact) < 0.03

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        n = 100
        k = _spd(rng, n)
        a = slq_logdet(lambda v: k @ v, n, ProbeSet.draw(n, 10, 3), 20)
        b = slq_logdet(lambda v: k @ v, n, ProbeSet.draw(n, 10, 3), 20)
        assert a == b

    def test_raises_on_indefinite_operator(self):
        k = np.diag([1.0, -2.0, 3.0, 4.0, 5.0, 6.0])
        with pytest.raises(NotPositiveDefiniteError):
            slq_logdet(lambda v: k @ v, 6, ProbeSet.draw(6, 4, 0), 6)

    def test_with_factors_returns_per_probe_factorizations(self):
        rng = np.random.default_rng(8)
        n = 40
        k = _spd(rng, n)
        probes = ProbeSet.draw(n, 5, 0)
        est, factors = slq_logdet_with_factors(lambda v: k @ v, probes, 15)
        assert len(factors) == 5
        assert est == pytest.approx(
            slq_logdet(lambda v: k @ v, n, probes, 15), rel=1e-14)


class _DenseOp:
    """Minimal operator wrapper for gradient tests."""

    def __init__(self, base, sigma2):
        self.base = base
        self.sigma2 = sigma2
        self.n = base.shape[0]
        self.n_params = 2  # one scale parameter + noise

    def matvec(self, v):
        return self.base @ v + self.sigma2 * v

    def derivative_matvec(self, idx, v):
        if idx == 0:                      # d/dlog(scale): K itself
            return self.base @ v
        return 2.0 * self.sigma2 * v      # d/dlog(noise std)


class TestSlqNlmlGradient:
    def test_matches_exact_gradient_on_commuting_directions(self):
        rng = np.random.default_rng(9)
        n = 120
        base = _spd(rng, n)
        op = _DenseOp(base, 0.5)
        y = rng.normal(size=n)
        k = base + 0.5 * np.eye(n)
        kinv = np.linalg.inv(k)
        alpha = kinv @ y
        probes = ProbeSet.draw(n, 200, 0)
        grad, reports = slq_nlml_gradient(op, y, alpha, probes, cg_tol=1e-12)
        assert all(r.converged for r in reports)
        exact = np.array([
            -alpha @ base @ alpha + np.trace(kinv @ base),
            -alpha @ alpha + np.trace(kinv)]) * np.array([1.0, 1.0])
        exact[1] = (-alpha @ alpha + np.trace(kinv)) * 2 * 0.5
        np.testing.assert_allclose(grad, exact, rtol=0.05)

    def test_param_indices_subsets_gradient(self):
        rng = np.random.default_rng(10)
        n = 60
        op = _DenseOp(_spd(rng, n), 0.3)
        y = rng.normal(size=n)
        alpha = np.linalg.solve(op.base + 0.3 * np.eye(n), y)
        probes = ProbeSet.draw(n, 10, 0)
        full, _ = slq_nlml_gradient(op, y, alpha, probes, cg_tol=1e-10)
        part, _ = slq_nlml_gradient(op, y, alpha, probes, cg_tol=1e-10,
                                    param_indices=[1])
        assert part.shape == (1,)
        assert part[0] == pytest.approx(full[1], rel=1e-12)
