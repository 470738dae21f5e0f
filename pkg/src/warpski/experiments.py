"""Config-driven experiment runners: synthetic benchmark and separation.

Runs are fully deterministic given their config (all randomness is
seeded) and every reported number is recomputable from the persisted
CSV artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .csvio import save_columns_csv
from .exceptions import ConfigError
from .grids import grid_covering_box
from .kernels import Product, QuasiPeriodic, SquaredExponential
from .krylov import cg_solve
from .metrics import rmse, snr_improvement
from .model import (GpComponent, GpModel, approx_nlml, build_operator, fit,
                    sample_prior, separate, exact_separation_means)
from .warping import ElementwiseWarp, Identity, Polynomial1D, phase_from_events


@dataclass
class ExperimentConfig:
    """Experiment settings; field names mirror the CLI flags."""
    kind: str = "numeric2d"
    n: int = 2000
    seed: int = 0
    noise: float = 0.5
    cg_tol_inference: float = 1e-1
    cg_tol_separation: float = 5e-3
    n_probes: int = 20
    lanczos_steps: int = 30
    max_steps: int = 100
    out_dir: str | None = None

    # numeric2d
    data_box: tuple = ((-1.2, 0.75), (-2.5, 2.5))
    warp_coeffs: tuple = (2.0, 0.0, 1.0)
    amplitude: float = 1.5
    lengthscale: float = 0.4
    grid_counts: tuple = (100, 100)
    sample_grid_counts: tuple = (200, 160)
    start_noise: float = 1.0
    start_amplitude: float = 1.0
    start_lengthscale: float = 0.6
    fit_lengthscales: bool = True

    # separation1d
    dt: float = 0.002
    maternal_period: float = 0.85
    period_ratio: float = 2.8
    period_jitter: float = 0.03
    amplitudes: tuple = (1.0, 0.4)
    env_lengthscale: float = 20.0
    per_lengthscale: float = 0.6
    grid_per_cycle: int = 24
    compare_oracle: bool = False
    maternal_events_csv: str | None = None
    fetal_events_csv: str | None = None
    data_csv: str | None = None

    def __post_init__(self):
        if self.kind not in ("numeric2d", "separation1d", "custom"):
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}")
        if self.n <= 0:
            raise ConfigError("n: must be a positive integer")
        if self.noise <= 0:
            raise ConfigError("noise: must be positive")
        for name in ("cg_tol_inference", "cg_tol_separation"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("n_probes", "lanczos_steps", "max_steps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be a positive integer")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunReport:
    """Numbers reported by an experiment run."""
    kind: str
    n: int
    m_total: int
    timings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    learned: dict = field(default_factory=dict)
    cg_iterations: int = 0

    def rows(self):
        out = [("kind", self.kind), ("n", self.n), ("m_total", self.m_total),
               ("cg_iterations", self.cg_iterations)]
        for k, v in self.timings.items():
            out.append((f"time_{k}_s", v))
        for k, v in self.metrics.items():
            out.append((k, v))
        for k, v in self.learned.items():
            out.append((f"learned_{k}", v))
        return out


def _timeit(fn, repeats=3):
    """Median wall time of ``fn`` over ``repeats`` runs after a warm-up."""
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _write_report(config, report, extra_tables=None):
    if config.out_dir is None:
        return
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "config_echo.json"), "w") as fh:
        json.dump(config.to_dict(), fh, indent=2)
    with open(os.path.join(config.out_dir, "report.csv"), "w") as fh:
        fh.write("name,value\n")
        for name, value in report.rows():
            fh.write(f"{name},{value!r}\n" if isinstance(value, str)
                     else f"{name},{value}\n")
    for relpath, columns in (extra_tables or {}).items():
        save_columns_csv(os.path.join(config.out_dir, relpath), columns)


def numeric2d_model(config, grid_counts=None):
    """The warped-SE benchmark model (free grid sizing)."""
    box = [tuple(map(float, b)) for b in config.data_box]
    pad = 0.05 * (box[0][1] - box[0][0])
    warp = ElementwiseWarp([
        Polynomial1D(config.warp_coeffs,
                     domain=(box[0][0] - pad, box[0][1] + pad)),
        Identity()])
    warped_box = [tuple(sorted((warp.warps[0].forward(box[0][0]),
                                warp.warps[0].forward(box[0][1])))),
                  box[1]]
    counts = grid_counts if grid_counts is not None else config.grid_counts
    grid = grid_covering_box(warped_box, counts)
    kernel = Product([
        SquaredExponential(config.amplitude, config.lengthscale),
        SquaredExponential(1.0, config.lengthscale)], dims=[0, 1])
    # the second-axis amplitude is redundant with the first and stays fixed
    fixed = np.zeros(5, dtype=bool)
    fixed[2] = True
    if not config.fit_lengthscales:
        fixed[1] = True
        fixed[3] = True
    model = GpModel([GpComponent(kernel, warp, grid)], noise=config.noise,
                    fixed=fixed)
    return model


def _sample_numeric2d(config):
    rng = np.random.default_rng(config.seed)
    box = [tuple(map(float, b)) for b in config.data_box]
    x = np.column_stack([rng.uniform(lo, hi, config.n) for lo, hi in box])
    truth_model = numeric2d_model(config,
                                  grid_counts=config.sample_grid_counts)
    draw = sample_prior(truth_model, x, seed=config.seed + 1)
    return x, draw


def run_numeric2d(config):
    """Sample a warped-SE draw, learn hyperparameters, infer and report."""
    x, draw = _sample_numeric2d(config)
    y = draw.y

    model = numeric2d_model(config)
    start_theta = model.theta.copy()
    start_theta[0] = np.log(config.start_amplitude)
    if config.fit_lengthscales:
        start_theta[1] = np.log(config.start_lengthscale)
        start_theta[3] = np.log(config.start_lengthscale)
    start_theta[-1] = np.log(config.start_noise)
    model = model.with_theta(start_theta)

    t0 = time.perf_counter()
    result = fit(model, x, y, max_steps=config.max_steps, seed=config.seed,
                 n_probes=config.n_probes, cg_tol=config.cg_tol_inference,
                 lanczos_steps=config.lanczos_steps)
    t_learn = time.perf_counter() - t0
    fitted = result.model

    op = build_operator(fitted, x)
    t_inference = _timeit(
        lambda: cg_solve(op.matvec, y, tol=config.cg_tol_inference))
    rep = cg_solve(op.matvec, y, tol=config.cg_tol_inference)
    posterior_mean = op.matvec_no_noise(rep.x)
    t_nlml = _timeit(
        lambda: approx_nlml(fitted, x, y, n_probes=config.n_probes,
                            seed=config.seed, cg_tol=config.cg_tol_inference,
                            lanczos_steps=config.lanczos_steps,
                            with_gradient=False, operator=op))

    learned = {name: float(v) for name, v in
               zip(fitted.param_names, np.exp(fitted.theta))}
    report = RunReport(
        kind="numeric2d", n=config.n,
        m_total=fitted.components[0].grid.total_size,
        timings={"inference": t_inference, "nlml_eval": t_nlml,
                 "learning": t_learn},
        metrics={"rmse": rmse(posterior_mean, draw.latent),
                 "nlml": result.value},
        learned=learned,
        cg_iterations=rep.iterations)
    _write_report(config, report, extra_tables={
        os.path.join("curves", "posterior.csv"): {
            "x0": x[:, 0], "x1": x[:, 1], "y": y,
            "latent_truth": draw.latent, "posterior_mean": posterior_mean}})
    return report


def _synthetic_events(rng, t_end, period, jitter):
    times = [-period]
    while times[-1] < t_end + period:
        step = period * (1.0 + jitter * rng.standard_normal())
        times.append(times[-1] + max(step, 0.2 * period))
    return np.asarray(times)


def separation_model(config, warps, t_end):
    """Two quasi-periodic phase-warped components over [0, t_end]."""
    comps = []
    for warp, amp in zip(warps, config.amplitudes):
        phase_span = (float(warp.forward(0.0)), float(warp.forward(t_end)))
        cycles = (phase_span[1] - phase_span[0]) / (2.0 * np.pi)
        count = max(int(np.ceil(cycles * config.grid_per_cycle)), 16)
        grid = grid_covering_box([phase_span], [count])
        kernel = QuasiPeriodic(amplitude=amp,
                               env_lengthscale=config.env_lengthscale,
                               per_lengthscale=config.per_lengthscale,
                               period=2.0 * np.pi)
        comps.append(GpComponent(kernel, warp, grid))
    # free: the two amplitudes; lengthscales, periods and noise stay fixed
    fixed = np.ones(2 * 5 + 1, dtype=bool)
    fixed[0] = False
    fixed[5] = False
    return GpModel(comps, noise=config.noise, fixed=fixed)


def run_separation1d(config):
    """Generate a two-source quasi-periodic mixture, fit and separate."""
    from .csvio import load_events_csv, load_series_csv

    rng = np.random.default_rng(config.seed)
    t = np.arange(config.n) * config.dt
    t_end = float(t[-1])

    if config.maternal_events_csv:
        ev1 = load_events_csv(config.maternal_events_csv)
    else:
        ev1 = _synthetic_events(rng, t_end, config.maternal_period,
                                config.period_jitter)
    if config.fetal_events_csv:
        ev2 = load_events_csv(config.fetal_events_csv)
    else:
        ev2 = _synthetic_events(rng, t_end,
                                config.maternal_period / config.period_ratio,
                                config.period_jitter)
    warps = [phase_from_events(ev1), phase_from_events(ev2)]
    model = separation_model(config, warps, t_end)

    if config.data_csv:
        series = load_series_csv(config.data_csv)
        if "time" not in series or "value" not in series:
            raise ConfigError("data_csv: expected 'time' and 'value' columns")
        t = series["time"]
        y = series["value"]
        truths = None
    else:
        draw = sample_prior(model, t, seed=config.seed + 1)
        y = draw.y
        truths = draw.latents

    t0 = time.perf_counter()
    result = fit(model, t, y, max_steps=config.max_steps, seed=config.seed,
                 n_probes=config.n_probes, cg_tol=config.cg_tol_inference,
                 lanczos_steps=config.lanczos_steps)
    t_learn = time.perf_counter() - t0
    fitted = result.model

    t0 = time.perf_counter()
    sep = separate(fitted, t, y, cg_tol=config.cg_tol_separation)
    t_sep = time.perf_counter() - t0

    metrics = {}
    if truths is not None:
        for j, name in enumerate(("maternal", "fetal")):
            metrics[f"snr_improvement_{name}_db"] = snr_improvement(
                y, sep.means[j], truths[j])
    if config.compare_oracle and config.n <= 3000:
        exact_means, _ = exact_separation_means(fitted, t, y)
        for j, name in enumerate(("maternal", "fetal")):
            rel = (np.linalg.norm(sep.means[j] - exact_means[j])
                   / np.linalg.norm(exact_means[j]))
            metrics[f"oracle_rel_l2_{name}"] = float(rel)

    learned = {name: float(v) for name, v in
               zip(fitted.param_names, np.exp(fitted.theta))}
    report = RunReport(
        kind="separation1d", n=config.n,
        m_total=sum(c.grid.total_size for c in fitted.components),
        timings={"learning": t_learn, "separation": t_sep},
        metrics=metrics, learned=learned,
        cg_iterations=sep.cg_report.iterations)
    tables = {os.path.join("separated", "sources.csv"): {
        "time": t, "y": y,
        "mean_maternal": sep.means[0], "mean_fetal": sep.means[1],
        **({"truth_maternal": truths[0], "truth_fetal": truths[1]}
           if truths is not None else {})}}
    _write_report(config, report, extra_tables=tables)
    return report


def run_sweep(config, n_values, m_axis_counts):
    """Timing/error curves over input and inducing-point counts."""
    rows_n = {"n": [], "time_inference_s": [], "time_nlml_s": [], "rmse": []}
    for n in n_values:
        sub = dataclasses.replace(config, n=int(n), out_dir=None,
                                  max_steps=1)
        x, draw = _sample_numeric2d(sub)
        model = numeric2d_model(sub)
        op = build_operator(model, x)
        t_inf = _timeit(lambda: cg_solve(op.matvec, draw.y,
                                         tol=sub.cg_tol_inference))
        t_nlml = _timeit(lambda: approx_nlml(
            model, x, draw.y, n_probes=sub.n_probes, seed=sub.seed,
            cg_tol=sub.cg_tol_inference, lanczos_steps=sub.lanczos_steps,
            with_gradient=False, operator=op))
        rep = cg_solve(op.matvec, draw.y, tol=sub.cg_tol_inference)
        err = rmse(op.matvec_no_noise(rep.x), draw.latent)
        rows_n["n"].append(n)
        rows_n["time_inference_s"].append(t_inf)
        rows_n["time_nlml_s"].append(t_nlml)
        rows_n["rmse"].append(err)
    rows_m = {"m_total": [], "time_inference_s": [], "mvm_time_s": []}
    for counts in m_axis_counts:
        sub = dataclasses.replace(config, out_dir=None,
                                  grid_counts=tuple(counts))
        x, draw = _sample_numeric2d(sub)
        model = numeric2d_model(sub)
        op = build_operator(model, x)
        t_inf = _timeit(lambda: cg_solve(op.matvec, draw.y,
                                         tol=sub.cg_tol_inference))
        t_mvm = _timeit(lambda: op.matvec(draw.y))
        rows_m["m_total"].append(model.components[0].grid.total_size)
        rows_m["time_inference_s"].append(t_inf)
        rows_m["mvm_time_s"].append(t_mvm)
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(os.path.join(config.out_dir, "config_echo.json"), "w") as fh:
            json.dump(config.to_dict(), fh, indent=2)
        save_columns_csv(os.path.join(config.out_dir, "curves",
                                      "scaling_vs_n.csv"), rows_n)
        save_columns_csv(os.path.join(config.out_dir, "curves",
                                      "scaling_vs_m.csv"), rows_m)
    return rows_n, rows_m
