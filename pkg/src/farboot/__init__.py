"""Functional autoregression of order one: simulation, kernel regression,
residual bootstrap and Monte Carlo validation."""

from farboot.ar_bootstrap import (
    BootstrapDraw,
    CoupledDraw,
    ResidualPool,
    bootstrap_estimate,
    build_coupled_draw,
    extract_residuals,
    generate_pseudo_series,
    resample_indices,
)
from farboot.config import ExperimentConfig, load_config, parse_config
from farboot.distances import EmpiricalLaw, kolmogorov_distance, mallows_distance
from farboot.errors import (
    ConfigurationError,
    DegenerateSampleError,
    FarbootError,
    GridMismatchError,
    NumericalError,
    UnsupportedCaseError,
)
from farboot.function_space import Basis, Grid, GridFunction, SmoothClass, make_grid
from farboot.kernel_regression import (
    EstimatorConfig,
    FittedEstimator,
    Kernel,
    bandwidth_schedule,
    fit,
    nw_predict,
    restriction_radius,
)
from farboot.process_models import (
    FunctionalSeries,
    InnovationModel,
    RegressionOperator,
    draw_innovation,
    simulate_far1,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapDraw",
    "CoupledDraw",
    "ResidualPool",
    "bootstrap_estimate",
    "build_coupled_draw",
    "extract_residuals",
    "generate_pseudo_series",
    "resample_indices",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "EmpiricalLaw",
    "kolmogorov_distance",
    "mallows_distance",
    "ConfigurationError",
    "DegenerateSampleError",
    "FarbootError",
    "GridMismatchError",
    "NumericalError",
    "UnsupportedCaseError",
    "Basis",
    "Grid",
    "GridFunction",
    "SmoothClass",
    "make_grid",
    "EstimatorConfig",
    "FittedEstimator",
    "Kernel",
    "fit",
    "nw_predict",
    "bandwidth_schedule",
    "restriction_radius",
    "FunctionalSeries",
    "InnovationModel",
    "RegressionOperator",
    "draw_innovation",
    "simulate_far1",
]
