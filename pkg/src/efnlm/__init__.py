"""Exponential family nonlinear models: fitting, residual corrections, and
Monte Carlo diagnostics."""

__version__ = "0.1.0"

from . import errors
from .families import get_family
from .fitting import FitResult, ModelSpec, fit_at, irls_fit
from .linalg import JACOBI_BACKEND, sym_eigen
from .links import get_link
from .predictor import Dataset, make_predictor
from .residuals import ResidualReport, residual_report
from .simulate import SimulationConfig, run_monte_carlo

__all__ = [
    "Dataset",
    "FitResult",
    "JACOBI_BACKEND",
    "ModelSpec",
    "ResidualReport",
    "SimulationConfig",
    "errors",
    "fit_at",
    "get_family",
    "get_link",
    "irls_fit",
    "make_predictor",
    "residual_report",
    "run_monte_carlo",
    "sym_eigen",
]
