"""Nonlinear beam with a moving concentrated mass: mollified regularization,
Picard solver, and convergence diagnostics along a shrinking mollifier scale."""
from .config import ConfigError, RunConfig, load_config, loads_config, shipped_config
from .discretization import Field, Grid, GridMismatchError, TimeAxis
from .expr import ExpressionError, differentiate, evaluate, parse_expression, to_string
from .fixed_point import PicardDivergence, PicardNonConvergence, PicardReport, apply_C, picard_solve
from .kernels import Mollifier, Truncation, bump, make_mollifier, make_truncation, smooth
from .linear_solver import (BoundaryQuiescenceError, SolverInstabilityError, StateHistory, estimate_ratio,
                            solve_linear)
from .model import RegularizationParams, Scenario, ScenarioError, forcing_h, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "RunConfig", "load_config", "loads_config", "shipped_config",
    "Field", "Grid", "GridMismatchError", "TimeAxis",
    "ExpressionError", "differentiate", "evaluate", "parse_expression", "to_string",
    "PicardDivergence", "PicardNonConvergence", "PicardReport", "apply_C", "picard_solve",
    "Mollifier", "Truncation", "bump", "make_mollifier", "make_truncation", "smooth",
    "BoundaryQuiescenceError", "SolverInstabilityError", "StateHistory", "estimate_ratio", "solve_linear",
    "RegularizationParams", "Scenario", "ScenarioError", "forcing_h", "validate_scenario",
]
