"""Matrix-free Krylov machinery: CG, Lanczos, stochastic Lanczos quadrature.

All routines access the operator only through a matvec callable and are
deterministic given their seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import NotPositiveDefiniteError


@dataclass
class CgReport:
    """Result of a conjugate-gradient solve."""
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg_solve(apply, y, tol=1e-8, max_iter=None, x0=None):
    """Linear conjugate gradients for a symmetric PSD operator.

    Stops when the relative residual ||Kx - y|| / ||y|| drops below
    ``tol``. On iteration exhaustion the report carries
    ``converged=False``; the caller decides severity.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_iter is None:
        max_iter = n
    ynorm = np.linalg.norm(y)
    if ynorm == 0.0:
        return CgReport(np.zeros(n), 0, 0.0, True)
    if x0 is None:
        x = np.zeros(n)
        r = y.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        r = y - apply(x)
    p = r.copy()
    rs = r @ r
    it = 0
    while it < max_iter:
        if np.sqrt(rs) / ynorm <= tol:
            return CgReport(x, it, float(np.sqrt(rs) / ynorm), True)
        kp = apply(p)
        denom = p @ kp
        if denom <= 0.0:
            break
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * kp
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    res = float(np.linalg.norm(y - apply(x)) / ynorm)
    return CgReport(x, it, res, res <= tol)


@dataclass
class ProbeSet:
    """Reproducible Rademacher probe vectors (entries in {-1, +1})."""
    count: int
    seed: int
    vectors: np.ndarray

    @classmethod
    def draw(cls, n, count, seed):
        rng = np.random.default_rng(seed)
        vectors = rng.integers(0, 2, size=(n, count)).astype(float) * 2.0 - 1.0
        return cls(count=count, seed=seed, vectors=vectors)


@dataclass
class LanczosFactor:
    """Tridiagonal Lanczos factorization with (optional) stored basis."""
    alphas: np.ndarray
    betas: np.ndarray
    basis: np.ndarray | None
    steps: int

    def ritz(self):
        """Eigenvalues of T and first components of its eigenvectors."""
        if self.steps == 1:
            return self.alphas[:1].copy(), np.ones((1, 1))
        vals, vecs = scipy.linalg.eigh_tridiagonal(self.alphas, self.betas)
        return vals, vecs


def lanczos(apply, start_vector, k, keep_basis=True, breakdown_tol=1e-12):
    """Lanczos tridiagonalization with full reorthogonalization.

    Stops early on breakdown (beta ~ 0), which signals an invariant
    subspace and truncates the factor benignly.
    """
    v = np.asarray(start_vector, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("start vector must be nonzero")
    n = v.size
    k = min(int(k), n)
    q = v / norm
    basis = np.zeros((n, k))
    alphas = np.zeros(k)
    betas = np.zeros(max(k - 1, 0))
    basis[:, 0] = q
    scale = None
    steps = 0
    for j in range(k):
        w = apply(basis[:, j])
        alphas[j] = basis[:, j] @ w
        w = w - alphas[j] * basis[:, j]
        if j > 0:
            w = w - betas[j - 1] * basis[:, j - 1]
        # full reorthogonalization, two passes
        active = basis[:, :j + 1]
        w = w - active @ (active.T @ w)
        w = w - active @ (active.T @ w)
        steps = j + 1
        if scale is None:
            scale = max(abs(alphas[0]), 1e-300)
        if j == k - 1:
            break
        beta = np.linalg.norm(w)
        if beta <= breakdown_tol * scale:
            break
        betas[j] = beta
        basis[:, j + 1] = w / beta
    return LanczosFactor(
        alphas=alphas[:steps],
        betas=betas[:max(steps - 1, 0)],
        basis=basis[:, :steps] if keep_basis else None,
        steps=steps)


def _probe_log_quadrature(apply, z, k):
    """Gauss quadrature of log over one probe's Lanczos tridiagonal."""
    factor = lanczos(apply, z, k, keep_basis=True)
    vals, vecs = factor.ritz()
    if np.any(vals <= 0.0):
        raise NotPositiveDefiniteError(
            f"nonpositive Ritz value {vals.min():.3e}; the operator is not "
            "positive definite (consider a noise/jitter floor)")
    weights = vecs[0, :] ** 2
    znorm2 = float(z @ z)
    return znorm2 * float(weights @ np.log(vals)), factor


def slq_logdet(apply, n, probes, k):
    """Stochastic Lanczos quadrature estimate of log|K|.

    Averages per-probe Gauss quadratures of log over the Rademacher
    probe set; deterministic given the probe seed.
    """
    total = 0.0
    for i in range(probes.count):
        est, _ = _probe_log_quadrature(apply, probes.vectors[:, i], k)
        total += est
    return total / probes.count


def slq_logdet_with_factors(apply, probes, k):
    """As :func:`slq_logdet` but also returns the per-probe factors."""
    total = 0.0
    factors = []
    for i in range(probes.count):
        est, factor = _probe_log_quadrature(apply, probes.vectors[:, i], k)
        total += est
        factors.append(factor)
    return total / probes.count, factors


def slq_nlml_gradient(op, y, alpha, probes, cg_tol=1e-8, max_iter=None,
                      param_indices=None):
    """Stochastic gradient of y^T K^{-1} y + log|K| w.r.t. log-parameters.

    The data term is -alpha^T (dK/dtheta) alpha with ``alpha = K^{-1} y``
    supplied by the caller; the trace term estimates
    trace(K^{-1} dK/dtheta) as the probe mean of z^T K^{-1} (dK/dtheta) z,
    solving K^{-1} z by CG at the same tolerance. Returns the gradient and
    a list of CG reports for the probe solves.
    """
    if param_indices is None:
        param_indices = range(op.n_params)
    param_indices = list(param_indices)
    alpha = np.asarray(alpha, dtype=float)
    grad = np.zeros(len(param_indices))
    reports = []
    solves = []
    for i in range(probes.count):
        z = probes.vectors[:, i]
        rep = cg_solve(op.matvec, z, tol=cg_tol, max_iter=max_iter)
        reports.append(rep)
        solves.append(rep.x)
    for j, idx in enumerate(param_indices):
        dk_alpha = op.derivative_matvec(idx, alpha)
        data_term = -float(alpha @ dk_alpha)
        trace_term = 0.0
        for i in range(probes.count):
            z = probes.vectors[:, i]
            trace_term += float(solves[i] @ op.derivative_matvec(idx, z))
        trace_term /= probes.count
        grad[j] = data_term + trace_term
    return grad, reports
