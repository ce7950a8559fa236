"""Joint-sparse recovery by forward-backward splitting with convergence diagnostics."""

from ._core import ConfigurationError, mixed_norm, row, row_norms, row_support
from .operators import (
    LowPrecisionWarning,
    OperatorContext,
    backward_step,
    fb_step,
    forward_step,
    gradient,
    project_tau_ball,
    spectral_norm_upper_bound,
)
from .solver import (
    SolveResult,
    SolverConfig,
    iterates,
    objective,
    optimality_residual,
    solve,
    solve_context,
)
from .problems import ProblemInstance, ProblemSpec, generate, per_column_baseline
from .estimator import JointSparseRegressor

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "JointSparseRegressor",
    "LowPrecisionWarning",
    "OperatorContext",
    "ProblemInstance",
    "ProblemSpec",
    "SolveResult",
    "SolverConfig",
    "backward_step",
    "fb_step",
    "forward_step",
    "generate",
    "gradient",
    "iterates",
    "mixed_norm",
    "objective",
    "optimality_residual",
    "per_column_baseline",
    "project_tau_ball",
    "row",
    "row_norms",
    "row_support",
    "solve",
    "solve_context",
    "spectral_norm_upper_bound",
]
