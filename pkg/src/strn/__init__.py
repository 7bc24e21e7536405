"""Scaled trust-region Newton method for bound-constrained nonlinear systems."""
from .errors import *  # noqa: F401,F403
from .problem import (
    Bounds,
    EvaluationCounter,
    ProblemDefinition,
    evaluate_merit,
    evaluate_residual,
    finite_difference_jacobian,
    project_to_interior,
)
from .scaling import ScalingDiagonal, compute_scaling
from .solver import (
    SolveReport,
    SolverParameters,
    TerminationReason,
    solve,
    solve_with_variable_theta,
    theta_schedule,
)
from .suite import get_problem, list_problems

__version__ = "0.1.0"
