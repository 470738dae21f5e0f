"""Serialization of kernels, warps, grids and models to structured text.

The format is plain JSON-compatible dicts: every object carries a
``kind`` plus its defining fields; composites carry ``children``.
Round-trips are exact up to floating-point representation.
"""

from __future__ import annotations

import json

import numpy as np

from .exceptions import ConfigError
from .grids import InducingGrid
from .kernels import (Kernel, Periodic, Product, QuasiPeriodic,
                      SquaredExponential, Sum)
from .model import GpComponent, GpModel
from .warping import (ElementwiseWarp, Identity, PiecewiseLinearPhase,
                      Polynomial1D, Warp)


def kernel_to_dict(kernel):
    if isinstance(kernel, SquaredExponential):
        a, l = kernel.params.values
        return {"kind": "se", "amplitude": a, "lengthscale": l}
    if isinstance(kernel, Periodic):
        a, l, p = kernel.params.values
        return {"kind": "periodic", "amplitude": a, "lengthscale": l,
                "period": p}
    if isinstance(kernel, QuasiPeriodic):
        return {"kind": "quasiperiodic",
                "children": [kernel_to_dict(c) for c in kernel.children]}
    if isinstance(kernel, Product):
        return {"kind": "product", "dims": list(kernel.dims),
                "children": [kernel_to_dict(c) for c in kernel.children]}
    if isinstance(kernel, Sum):
        return {"kind": "sum",
                "children": [kernel_to_dict(c) for c in kernel.children]}
    raise ConfigError(f"cannot serialize kernel of type {type(kernel).__name__}")


def kernel_from_dict(spec):
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ConfigError("kernel spec needs a 'kind' field") from None
    if kind == "se":
        return SquaredExponential(spec["amplitude"], spec["lengthscale"])
    if kind == "periodic":
        return Periodic(spec["amplitude"], spec["lengthscale"], spec["period"])
    if kind == "quasiperiodic":
        children = [kernel_from_dict(c) for c in spec["children"]]
        return QuasiPeriodic(_children=children)
    if kind == "product":
        children = [kernel_from_dict(c) for c in spec["children"]]
        return Product(children, dims=spec.get("dims"))
    if kind == "sum":
        return Sum([kernel_from_dict(c) for c in spec["children"]])
    raise ConfigError(f"unknown kernel kind {kind!r}")


def _domain_out(domain):
    lo, hi = domain
    return [None if np.isinf(lo) else lo, None if np.isinf(hi) else hi]


def _domain_in(val):
    if val is None:
        return None
    lo = -np.inf if val[0] is None else float(val[0])
    hi = np.inf if val[1] is None else float(val[1])
    return (lo, hi)


def warp_to_dict(warp):
    if isinstance(warp, Identity):
        return {"kind": "identity", "domain": _domain_out(warp.domain)}
    if isinstance(warp, Polynomial1D):
        return {"kind": "polynomial", "coeffs": list(warp.coeffs),
                "domain": _domain_out(warp.domain)}
    if isinstance(warp, PiecewiseLinearPhase):
        return {"kind": "phase",
                "knot_times": warp.knot_times.tolist(),
                "knot_phases": warp.knot_phases.tolist(),
                "domain": _domain_out(warp.domain)}
    if isinstance(warp, ElementwiseWarp):
        return {"kind": "elementwise",
                "children": [warp_to_dict(c) for c in warp.warps]}
    raise ConfigError(f"cannot serialize warp of type {type(warp).__name__}")


def warp_from_dict(spec):
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ConfigError("warp spec needs a 'kind' field") from None
    if kind == "identity":
        return Identity(domain=_domain_in(spec.get("domain")))
    if kind == "polynomial":
        return Polynomial1D(spec["coeffs"], domain=_domain_in(spec["domain"]))
    if kind == "phase":
        return PiecewiseLinearPhase(spec["knot_times"], spec["knot_phases"],
                                    domain=_domain_in(spec.get("domain")))
    if kind == "elementwise":
        return ElementwiseWarp([warp_from_dict(c) for c in spec["children"]])
    raise ConfigError(f"unknown warp kind {kind!r}")


def grid_to_dict(grid):
    return {"axes": [a.tolist() for a in grid.axes]}


def grid_from_dict(spec):
    try:
        axes = spec["axes"]
    except (TypeError, KeyError):
        raise ConfigError("grid spec needs an 'axes' field") from None
    return InducingGrid([np.asarray(a, dtype=float) for a in axes])


def model_to_dict(model):
    return {
        "components": [
            {"kernel": kernel_to_dict(c.kernel),
             "warp": warp_to_dict(c.warp),
             "grid": grid_to_dict(c.grid)}
            for c in model.components],
        "noise": model.noise,
        "fixed": model.fixed.astype(int).tolist(),
    }


def model_from_dict(spec):
    comps = [GpComponent(kernel=kernel_from_dict(c["kernel"]),
                         warp=warp_from_dict(c["warp"]),
                         grid=grid_from_dict(c["grid"]))
             for c in spec["components"]]
    fixed = np.asarray(spec.get("fixed", []), dtype=bool)
    return GpModel(comps, noise=spec["noise"],
                   fixed=fixed if fixed.size else None)


def model_to_json(model, indent=2):
    return json.dumps(model_to_dict(model), indent=indent)


def model_from_json(text):
    return model_from_dict(json.loads(text))


def fit_report_to_dict(result, model=None):
    """Serializable summary of a fit: learned values, objective and flag."""
    model = model or result.model
    return {
        "value": None if result.value is None else float(result.value),
        "flag": result.flag,
        "n_evaluations": result.n_evaluations,
        "params": {name: float(v) for name, v in
                   zip(model.param_names, np.exp(model.theta))},
    }
