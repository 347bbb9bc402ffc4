"""Regularized Hughes crowd model with controllable guide agents."""

from .config import ScenarioConfig, parse_and_validate
from .forward import Problem, ForwardTrajectory, solve_forward
from .kernels import BACKEND
from .objectives import ObjectiveConfig, objective_value
from .sensitivity import solve_adjoint, solve_tangent

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ForwardTrajectory",
    "ObjectiveConfig",
    "Problem",
    "ScenarioConfig",
    "objective_value",
    "parse_and_validate",
    "solve_adjoint",
    "solve_forward",
    "solve_tangent",
]
