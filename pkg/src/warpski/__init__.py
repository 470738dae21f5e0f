"""Scalable GP regression and source separation with warped inducing grids."""

from .kernels import (Hyperparameters, Periodic, Product, QuasiPeriodic,
                      SquaredExponential, Sum, toeplitz_column)
from .warping import (ElementwiseWarp, Identity, PiecewiseLinearPhase,
                      Polynomial1D, phase_from_events)
from .grids import (InducingGrid, InterpWeights, build_grid,
                    grid_covering_box, interpolation_weights, warped_grid)
from .structured import KronEigen, KronOperator, SymToeplitz
from .operators import MixtureOperator, SkiComponent, build_component
from .krylov import CgReport, LanczosFactor, ProbeSet, cg_solve, lanczos, \
    slq_logdet, slq_nlml_gradient
from .model import (FitResult, GpComponent, GpModel, LogNormalPrior,
                    SeparationResult, approx_nlml, build_operator,
                    exact_nlml, fit, predict_mean, sample_prior, separate)

__version__ = "0.1.0"
