"""Stationary, separable covariance functions with hyperparameter gradients.

All kernels are even functions of the lag ``tau = x - x'``. Hyperparameters
are strictly positive and stored in log-space so that gradient-based
optimization is unconstrained. Gradients are taken with respect to the
log-parameters throughout.

Parameter ordering is stable per kernel kind: amplitude first, then
lengthscales, then periods. Composite kernels concatenate their children's
parameters in child order.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, NonEquispacedAxisError

EQUISPACED_RTOL = 1e-9


class Hyperparameters:
    """Ordered positive hyperparameters, stored internally as logs."""

    def __init__(self, names, values=None, log_values=None):
        self.names = tuple(names)
        if log_values is None:
            values = np.asarray(values, dtype=float)
            if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
                raise ValueError("hyperparameters must be strictly positive and finite")
            log_values = np.log(values)
        self._log = np.array(log_values, dtype=float, copy=True)
        self._log.flags.writeable = False

    @property
    def log(self):
        return self._log

    @property
    def values(self):
        return np.exp(self._log)

    def __len__(self):
        return self._log.size

    def __repr__(self):
        pairs = ", ".join(f"{n}={v:.6g}" for n, v in zip(self.names, self.values))
        return f"Hyperparameters({pairs})"


class Kernel:
    """Base class for stationary kernels. Instances are immutable."""

    kind = "base"
    arity = 1

    @property
    def params(self) -> Hyperparameters:
        raise NotImplementedError

    @property
    def n_params(self):
        return len(self.params)

    @property
    def log_params(self):
        return self.params.log

    @property
    def param_names(self):
        return self.params.names

    def with_log_params(self, log_params) -> "Kernel":
        """Return a copy of this kernel with new log-space hyperparameters."""
        raise NotImplementedError

    def eval(self, tau):
        """Evaluate k(tau). For arity-1 kernels ``tau`` is elementwise; for
        multi-dimensional kernels the trailing axis of ``tau`` indexes dims."""
        raise NotImplementedError

    def grad(self, tau):
        """Gradient d k / d log(theta_j), stacked on a leading axis."""
        raise NotImplementedError

    def __call__(self, tau):
        return self.eval(tau)

    def _check_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.arity == 1:
            return tau
        if tau.ndim == 0 or tau.shape[-1] != self.arity:
            raise DimensionMismatchError(
                f"kernel arity {self.arity} but lag has trailing "
                f"dimension {tau.shape[-1] if tau.ndim else 0}"
            )
        return tau


class SquaredExponential(Kernel):
    """k(tau) = amplitude^2 * exp(-tau^2 / (2 lengthscale^2))."""

    kind = "se"

    def __init__(self, amplitude, lengthscale):
        self._params = Hyperparameters(("amplitude", "lengthscale"),
                                       (amplitude, lengthscale))

    @property
    def params(self):
        return self._params

    @property
    def amplitude(self):
        return self._params.values[0]

    @property
    def lengthscale(self):
        return self._params.values[1]

    def with_log_params(self, log_params):
        a, l = np.exp(np.asarray(log_params, dtype=float))
        return SquaredExponential(a, l)

    def eval(self, tau):
        tau = self._check_tau(tau)
        a, l = self._params.values
        return a * a * np.exp(-0.5 * (tau / l) ** 2)

    def grad(self, tau):
        tau = self._check_tau(tau)
        k = self.eval(tau)
        _, l = self._params.values
        return np.stack([2.0 * k, k * (tau / l) ** 2])


class Periodic(Kernel):
    """Exponentiated-sine periodic kernel:
    k(tau) = amplitude^2 * exp(-2 sin^2(pi tau / period) / lengthscale^2)."""

    kind = "periodic"

    def __init__(self, amplitude, lengthscale, period):
        self._params = Hyperparameters(("amplitude", "lengthscale", "period"),
                                       (amplitude, lengthscale, period))

    @property
    def params(self):
        return self._params

    @property
    def period(self):
        return self._params.values[2]

    def with_log_params(self, log_params):
        a, l, p = np.exp(np.asarray(log_params, dtype=float))
        return Periodic(a, l, p)

    def eval(self, tau):
        tau = self._check_tau(tau)
        a, l, p = self._params.values
        s = np.sin(np.pi * tau / p)
        return a * a * np.exp(-2.0 * (s / l) ** 2)

    def grad(self, tau):
        tau = self._check_tau(tau)
        a, l, p = self._params.values
        arg = np.pi * tau / p
        s = np.sin(arg)
        k = a * a * np.exp(-2.0 * (s / l) ** 2)
        d_amp = 2.0 * k
        d_len = k * 4.0 * (s / l) ** 2
        # d/d log p via chain rule: sin(2 arg) = 2 sin(arg) cos(arg)
        d_per = k * (2.0 * np.pi * tau / (p * l * l)) * np.sin(2.0 * arg)
        return np.stack([d_amp, d_len, d_per])


class Sum(Kernel):
    """Sum of kernels of equal arity; parameters are concatenated."""

    kind = "sum"

    def __init__(self, children):
        children = list(children)
        if not children:
            raise ValueError("Sum requires at least one child kernel")
        arity = children[0].arity
        if any(c.arity != arity for c in children):
            raise DimensionMismatchError("Sum children must share arity")
        self.children = children
        self.arity = arity

    @property
    def params(self):
        names, logs = [], []
        for i, c in enumerate(self.children):
            names.extend(f"{i}.{n}" for n in c.param_names)
            logs.append(c.log_params)
        return Hyperparameters(names, log_values=np.concatenate(logs))

    def _split(self, log_params):
        log_params = np.asarray(log_params, dtype=float)
        out, pos = [], 0
        for c in self.children:
            out.append(log_params[pos:pos + c.n_params])
            pos += c.n_params
        if pos != log_params.size:
            raise DimensionMismatchError("wrong number of parameters")
        return out

    def with_log_params(self, log_params):
        parts = self._split(log_params)
        return Sum([c.with_log_params(p) for c, p in zip(self.children, parts)])

    def eval(self, tau):
        return sum(c.eval(tau) for c in self.children)

    def grad(self, tau):
        return np.concatenate([c.grad(tau) for c in self.children])


class Product(Kernel):
    """Product of kernels, optionally across distinct input dimensions.

    ``dims[i]`` is the input dimension that child ``i`` acts on; when all
    dims are 0 (default) the product is over a shared 1-D lag. The kernel
    arity is ``max(dims) + 1``; children must themselves be arity-1.
    """

    kind = "product"

    def __init__(self, children, dims=None):
        children = list(children)
        if not children:
            raise ValueError("Product requires at least one child kernel")
        if any(c.arity != 1 for c in children):
            raise DimensionMismatchError("Product children must be 1-D kernels")
        if dims is None:
            dims = [0] * len(children)
        dims = [int(d) for d in dims]
        if len(dims) != len(children) or min(dims) < 0:
            raise DimensionMismatchError("dims must map each child to a dimension")
        ndim = max(dims) + 1
        if sorted(set(dims)) != list(range(ndim)):
            raise DimensionMismatchError("dims must cover 0..D-1 without gaps")
        self.children = children
        self.dims = dims
        self.arity = ndim

    @property
    def params(self):
        names, logs = [], []
        for i, c in enumerate(self.children):
            names.extend(f"{i}.{n}" for n in c.param_names)
            logs.append(c.log_params)
        return Hyperparameters(names, log_values=np.concatenate(logs))

    def _split(self, log_params):
        log_params = np.asarray(log_params, dtype=float)
        out, pos = [], 0
        for c in self.children:
            out.append(log_params[pos:pos + c.n_params])
            pos += c.n_params
        if pos != log_params.size:
            raise DimensionMismatchError("wrong number of parameters")
        return out

    def _with_children(self, children):
        return Product(children, self.dims)

    def with_log_params(self, log_params):
        parts = self._split(log_params)
        return self._with_children(
            [c.with_log_params(p) for c, p in zip(self.children, parts)])

    def _child_lags(self, tau):
        tau = self._check_tau(tau)
        if self.arity == 1:
            return tau, [tau for _ in self.children]
        return tau, [tau[..., d] for d in self.dims]

    def eval(self, tau):
        _, lags = self._child_lags(tau)
        out = self.children[0].eval(lags[0])
        for c, lag in zip(self.children[1:], lags[1:]):
            out = out * c.eval(lag)
        return out

    def grad(self, tau):
        _, lags = self._child_lags(tau)
        vals = [c.eval(lag) for c, lag in zip(self.children, lags)]
        total = np.prod(np.stack(vals), axis=0)
        blocks = []
        for i, (c, lag) in enumerate(zip(self.children, lags)):
            g = c.grad(lag)
            with np.errstate(divide="ignore", invalid="ignore"):
                rest = np.where(vals[i] != 0.0, total / vals[i], 0.0)
            if np.any(vals[i] == 0.0):
                others = [v for j, v in enumerate(vals) if j != i]
                rest = np.prod(np.stack(others), axis=0) if others else np.ones_like(total)
            blocks.append(g * rest)
        return np.concatenate(blocks)


class QuasiPeriodic(Product):
    """SE envelope times a unit-amplitude periodic kernel on the same axis.

    Parameter layout follows the Product convention: the SE child carries
    (amplitude, env_lengthscale) and the periodic child
    (amplitude=1, per_lengthscale, period). The periodic amplitude is
    redundant with the SE amplitude and is normally held fixed during
    learning; see :meth:`redundant_param_index`.
    """

    kind = "quasiperiodic"

    def __init__(self, amplitude=None, env_lengthscale=None,
                 per_lengthscale=None, period=None, _children=None):
        if _children is None:
            _children = [SquaredExponential(amplitude, env_lengthscale),
                         Periodic(1.0, per_lengthscale, period)]
        if (len(_children) != 2
                or not isinstance(_children[0], SquaredExponential)
                or not isinstance(_children[1], Periodic)):
            raise ValueError("QuasiPeriodic children must be (SE, Periodic)")
        super().__init__(_children, dims=[0, 0])

    @property
    def redundant_param_index(self):
        """Index (within this kernel's params) of the fixed periodic amplitude."""
        return 2

    def _with_children(self, children):
        return QuasiPeriodic(_children=children)


def toeplitz_column(kernel_1d, axis):
    """First column of the kernel matrix over an equispaced 1-D axis.

    The implied symmetric Toeplitz matrix equals the dense kernel matrix
    over ``axis``. Raises ``NonEquispacedAxisError`` if spacing is not
    uniform to relative tolerance 1e-9.
    """
    if kernel_1d.arity != 1:
        raise DimensionMismatchError("toeplitz_column requires a 1-D kernel")
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 1:
        raise DimensionMismatchError("axis must be a non-empty 1-D array")
    if axis.size > 1:
        check_equispaced(axis)
    return kernel_1d.eval(axis - axis[0])


def check_equispaced(axis, rtol=EQUISPACED_RTOL):
    """Validate uniform spacing, naming the first offending index."""
    axis = np.asarray(axis, dtype=float)
    d = np.diff(axis)
    if np.any(d <= 0.0):
        idx = int(np.argmax(d <= 0.0))
        raise NonEquispacedAxisError(f"axis not strictly increasing at index {idx + 1}")
    h = d.mean()
    bad = np.abs(d - h) > rtol * max(abs(h), 1e-300)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonEquispacedAxisError(
            f"axis spacing deviates from uniform at index {idx + 1}")
    return h


def dense_matrix(kernel, x1, x2=None):
    """Dense kernel matrix over point sets (rows x1, columns x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = x1 if x2 is None else np.asarray(x2, dtype=float)
    if kernel.arity == 1:
        a = x1.reshape(-1)
        b = x2.reshape(-1)
        return kernel.eval(a[:, None] - b[None, :])
    a = x1.reshape(len(x1), -1)
    b = x2.reshape(len(x2), -1)
    if a.shape[1] != kernel.arity or b.shape[1] != kernel.arity:
        raise DimensionMismatchError("point dimension does not match kernel arity")
    return kernel.eval(a[:, None, :] - b[None, :, :])
