"""Matrix-free mixture operator sum_i W_i K_{U_i U_i} W_i^T + sigma^2 I.

Each component pairs a stationary separable kernel with a warp and an
equispaced inducing grid in warped space. The inducing-point matrix is a
Kronecker product of per-axis symmetric Toeplitz factors, so MVMs cost
O(n + m log m) per component.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError
from .grids import InducingGrid, interpolation_weights, warped_grid
from .kernels import Kernel, Product, dense_matrix, toeplitz_column
from .structured import KronOperator, SymToeplitz
from .warping import ElementwiseWarp, Warp


def decompose_separable(kernel, ndim):
    """Split a separable kernel into per-axis 1-D kernels.

    Returns a list of ``(axis_kernel, param_indices)`` pairs, where
    ``param_indices`` maps the axis kernel's parameters into the full
    kernel's parameter vector.
    """
    if ndim == 1:
        if kernel.arity != 1:
            raise DimensionMismatchError("kernel arity does not match grid")
        return [(kernel, list(range(kernel.n_params)))]
    if not isinstance(kernel, Product) or kernel.arity != ndim:
        raise DimensionMismatchError(
            f"a {ndim}-D grid needs a Product kernel of matching arity")
    groups = {d: [] for d in range(ndim)}
    offsets = []
    pos = 0
    for child in kernel.children:
        offsets.append(pos)
        pos += child.n_params
    for i, (child, d) in enumerate(zip(kernel.children, kernel.dims)):
        groups[d].append((child, offsets[i]))
    out = []
    for d in range(ndim):
        members = groups[d]
        idx = []
        for child, off in members:
            idx.extend(range(off, off + child.n_params))
        if len(members) == 1:
            out.append((members[0][0], idx))
        else:
            out.append((Product([c for c, _ in members]), idx))
    return out


class SkiComponent:
    """One warped-SKI summand: weights, warp and Kronecker-of-Toeplitz K_UU."""

    def __init__(self, kernel, warp, grid, weights):
        self.kernel = kernel
        self.warp = warp
        self.grid = grid
        self.weights = weights
        self.axis_kernels = decompose_separable(kernel, grid.ndim)
        self.kuu = KronOperator([
            SymToeplitz(toeplitz_column(kd, ax))
            for (kd, _), ax in zip(self.axis_kernels, grid.axes)])

    @property
    def n_params(self):
        return self.kernel.n_params

    def matvec(self, v):
        """(W K_UU W^T) v."""
        return self.weights.matvec(self.kuu.matvec(self.weights.rmatvec(v)))

    def derivative_operator(self, param_index):
        """Kronecker-structured dK_UU / d log(theta_j) (sum over axes)."""
        terms = []
        for axis, ((kd, idx), ax) in enumerate(
                zip(self.axis_kernels, self.grid.axes)):
            if param_index not in idx:
                continue
            local = idx.index(param_index)
            lags = ax - ax[0]
            dcol = kd.grad(lags)[local]
            factors = []
            for other_axis, ((ko, _), axo) in enumerate(
                    zip(self.axis_kernels, self.grid.axes)):
                if other_axis == axis:
                    factors.append(SymToeplitz(dcol))
                else:
                    factors.append(SymToeplitz(toeplitz_column(ko, axo)))
            terms.append(KronOperator(factors))
        return terms

    def derivative_matvec(self, param_index, v):
        """(W dK_UU W^T) v for the given kernel hyperparameter."""
        if not 0 <= param_index < self.n_params:
            raise IndexError(f"parameter index {param_index} out of range")
        wt = self.weights.rmatvec(v)
        out = np.zeros_like(np.asarray(v, dtype=float))
        for op in self.derivative_operator(param_index):
            out = out + self.weights.matvec(op.matvec(wt))
        return out

    def dense_ski(self):
        """Explicit W K_UU W^T (desk scale)."""
        w = self.weights.dense()
        return w @ self.kuu.dense() @ w.T

    def dense_exact(self, x):
        """Dense warped kernel k(phi(x), phi(x')) as the oracle."""
        z = warp_points(self.warp, np.asarray(x, dtype=float), self.grid.ndim)
        return dense_matrix(self.kernel, z)


def warp_points(warp, x, ndim):
    """Apply a warp to a point set of shape (n,) or (n, D)."""
    x = np.asarray(x, dtype=float)
    if ndim == 1:
        flat = x.reshape(-1)
        return np.asarray(warp.forward(flat), dtype=float)
    if x.ndim != 2 or x.shape[1] != ndim:
        raise DimensionMismatchError(f"points must have shape (n, {ndim})")
    return np.asarray(warp.forward(x), dtype=float)


def build_component(kernel, warp, grid, x, construction="warp-points"):
    """Assemble a SkiComponent for data ``x``.

    ``grid`` is equispaced in warped space. Two mathematically equivalent
    construction paths exist: ``"warp-points"`` interpolates the warped
    points against the equispaced grid; ``"warp-grid"`` interpolates the
    raw points against the warped grid Uhat using warped-space stencil
    arithmetic. Both produce identical weights.
    """
    if not isinstance(kernel, Kernel):
        raise TypeError("kernel must be a Kernel")
    if not isinstance(warp, Warp):
        raise TypeError("warp must be a Warp")
    if not isinstance(grid, InducingGrid):
        raise TypeError("grid must be an InducingGrid")
    x = np.asarray(x, dtype=float)
    if construction == "warp-points":
        z = warp_points(warp, x, grid.ndim)
        weights = interpolation_weights(grid, z)
    elif construction == "warp-grid":
        if grid.ndim > 1 and not isinstance(warp, ElementwiseWarp):
            raise DimensionMismatchError(
                "the warp-grid construction needs an elementwise warp")
        uhat = warped_grid(grid, warp)
        weights = interpolation_weights(uhat, x)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    return SkiComponent(kernel, warp, grid, weights)


class MixtureOperator:
    """sum_i W_i K_{U_i U_i} W_i^T + sigma^2 I, exposed through MVMs.

    The flattened hyperparameter vector is the concatenation of each
    component's kernel parameters followed by the noise standard
    deviation; derivatives are with respect to log-parameters.
    """

    def __init__(self, components, noise_variance, n):
        if noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        self.components = list(components)
        self.noise_variance = float(noise_variance)
        self.n = int(n)
        for c in self.components:
            if c.weights.shape[0] != self.n:
                raise DimensionMismatchError(
                    "component weights row count does not match n")

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def n_params(self):
        return sum(c.n_params for c in self.components) + 1

    def param_owner(self, index):
        """Map a flat parameter index to ('component', i, local) or ('noise',)."""
        if not 0 <= index < self.n_params:
            raise IndexError(f"parameter index {index} out of range")
        pos = 0
        for i, c in enumerate(self.components):
            if index < pos + c.n_params:
                return ("component", i, index - pos)
            pos += c.n_params
        return ("noise",)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise DimensionMismatchError(
                f"operand has length {v.shape[0]}, expected {self.n}")
        out = self.noise_variance * v
        for c in self.components:
            out = out + c.matvec(v)
        return out

    def matvec_no_noise(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for c in self.components:
            out = out + c.matvec(v)
        return out

    def derivative_matvec(self, index, v):
        """(dK / d log theta_index) v; the noise entry gives 2 sigma^2 v."""
        owner = self.param_owner(index)
        v = np.asarray(v, dtype=float)
        if owner[0] == "noise":
            return 2.0 * self.noise_variance * v
        _, i, local = owner
        return self.components[i].derivative_matvec(local, v)

    def dense(self):
        """Explicitly assembled approximate kernel (desk scale)."""
        out = self.noise_variance * np.eye(self.n)
        for c in self.components:
            out = out + c.dense_ski()
        return out
