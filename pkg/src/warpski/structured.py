"""Fast structured matrix primitives: Toeplitz and Kronecker operators.

Index-order convention: flattened grid indices are C-ordered, i.e. the
LAST listed dimension varies fastest. The same convention is used for
interpolation weight columns; see ``INDEX_ORDER``.
"""

from __future__ import annotations

import numpy as np
import scipy.fft
import scipy.linalg

from .exceptions import DimensionMismatchError, NotPositiveDefiniteError

# Shared flattening convention for Kronecker factors and interpolation
# weight columns. "C" = row-major = last dimension fastest-varying.
INDEX_ORDER = "C"

PSD_RTOL = 1e-8


class SymToeplitz:
    """Symmetric Toeplitz matrix given by its first column.

    Matrix-vector products run in O(m log m) by embedding into a circulant
    of the next efficient FFT size >= 2m - 1; the transform of the
    embedding is cached at construction.
    """

    def __init__(self, first_column):
        c = np.asarray(first_column, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DimensionMismatchError("first_column must be a 1-D array")
        self.first_column = c.copy()
        m = c.size
        self.shape = (m, m)
        if m == 1:
            self._fft = None
            return
        length = scipy.fft.next_fast_len(2 * m - 1, real=True)
        emb = np.zeros(length)
        emb[:m] = c
        emb[length - m + 1:] = c[1:][::-1]
        self._len = length
        self._fft = scipy.fft.rfft(emb)

    def matmat(self, v):
        """Product with a vector or with the columns of a matrix."""
        v = np.asarray(v, dtype=float)
        m = self.shape[0]
        if v.shape[0] != m:
            raise DimensionMismatchError(
                f"operand has leading dimension {v.shape[0]}, expected {m}")
        if m == 1:
            return self.first_column[0] * v
        spec = scipy.fft.rfft(v, n=self._len, axis=0)
        spec *= self._fft.reshape((-1,) + (1,) * (v.ndim - 1))
        return scipy.fft.irfft(spec, n=self._len, axis=0)[:m]

    matvec = matmat

    def dense(self):
        return scipy.linalg.toeplitz(self.first_column)


def toeplitz_matvec(t, v):
    """Functional wrapper around :meth:`SymToeplitz.matvec`."""
    return t.matvec(v)


def _factor_shape(f):
    return f.shape


def _apply_factor(f, mat):
    if isinstance(f, SymToeplitz):
        return f.matmat(mat)
    return np.asarray(f) @ mat


def _factor_dense(f):
    if isinstance(f, SymToeplitz):
        return f.dense()
    return np.asarray(f, dtype=float)


class KronOperator:
    """Kronecker product of square per-dimension operators.

    MVMs are computed by sequential mode-d tensor contractions. The
    flattened index order is C-order (last factor fastest), matching
    ``INDEX_ORDER``.
    """

    def __init__(self, factors):
        factors = list(factors)
        if not factors:
            raise DimensionMismatchError("need at least one factor")
        for f in factors:
            s = _factor_shape(f)
            if len(s) != 2 or s[0] != s[1]:
                raise DimensionMismatchError("factors must be square")
        self.factors = factors
        self.sizes = tuple(_factor_shape(f)[0] for f in factors)
        n = int(np.prod(self.sizes))
        self.shape = (n, n)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        if v.shape[0] != self.shape[0]:
            raise DimensionMismatchError(
                f"operand has length {v.shape[0]}, expected {self.shape[0]}")
        nrhs = 1 if single else v.shape[1]
        x = v.reshape(self.sizes + (nrhs,))
        ndim = len(self.sizes)
        for d, f in enumerate(self.factors):
            x = np.moveaxis(x, d, 0)
            lead = x.shape[0]
            rest = x.shape[1:]
            x = _apply_factor(f, x.reshape(lead, -1)).reshape((lead,) + rest)
            x = np.moveaxis(x, 0, d)
        out = x.reshape(self.shape[0], nrhs)
        return out[:, 0] if single else out

    matmat = matvec

    def dense(self):
        out = _factor_dense(self.factors[0])
        for f in self.factors[1:]:
            out = np.kron(out, _factor_dense(f))
        return out


def kron_matvec(factors, v):
    """MVM with a Kronecker product given as a factor list."""
    op = factors if isinstance(factors, KronOperator) else KronOperator(factors)
    return op.matvec(v)


class KronEigen:
    """Per-factor eigendecomposition of a Kronecker-structured SPD matrix.

    Enables direct solves with (K + sigma^2 I) and exact log-determinants
    at desk scale (each factor is densified and decomposed).
    """

    def __init__(self, factors, psd_rtol=PSD_RTOL):
        dense = [_factor_dense(f) for f in factors]
        self.eigvals = []
        self.eigvecs = []
        for i, a in enumerate(dense):
            vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
            top = max(vals.max(), 0.0)
            if vals.min() < -psd_rtol * max(top, 1e-300):
                raise NotPositiveDefiniteError(
                    f"factor {i} has eigenvalue {vals.min():.3e} below "
                    f"-{psd_rtol:g} * max")
            self.eigvals.append(np.maximum(vals, 0.0))
            self.eigvecs.append(vecs)
        self.sizes = tuple(len(v) for v in self.eigvals)
        n = int(np.prod(self.sizes))
        self.shape = (n, n)
        # Global eigenvalues are products of per-factor eigenvalues,
        # flattened in the shared C-order convention.
        lam = self.eigvals[0]
        for v in self.eigvals[1:]:
            lam = np.multiply.outer(lam, v)
        self.global_eigvals = lam.ravel(order=INDEX_ORDER)

    def _q(self):
        return KronOperator(self.eigvecs)

    def _qt(self):
        return KronOperator([q.T for q in self.eigvecs])

    def solve(self, sigma2, y):
        """x = (K + sigma^2 I)^{-1} y via the eigenbasis."""
        if sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        w = self._qt().matvec(y)
        denom = self.global_eigvals + sigma2
        if np.any(denom <= 0.0):
            raise NotPositiveDefiniteError("K + sigma^2 I is singular")
        if w.ndim == 2:
            w = w / denom[:, None]
        else:
            w = w / denom
        return self._q().matvec(w)

    def logdet(self, sigma2):
        """log |K + sigma^2 I| from the global eigenvalues."""
        denom = self.global_eigvals + sigma2
        if np.any(denom <= 0.0):
            raise NotPositiveDefiniteError("K + sigma^2 I is singular")
        return float(np.sum(np.log(denom)))

    def sqrt_operator(self, clip=0.0):
        """KronOperator A with A A^T = K, for prior sampling."""
        roots = [q * np.sqrt(np.maximum(v, clip))[None, :]
                 for q, v in zip(self.eigvecs, self.eigvals)]
        return KronOperator(roots)


def kron_eigen_solve(eig, sigma2, y):
    return eig.solve(sigma2, y)


def kron_eigen_logdet(eig, sigma2):
    return eig.logdet(sigma2)
