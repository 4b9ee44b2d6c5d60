"""Numerical tools for the fractional g-Laplacian of Orlicz type."""
from .young import YoungFunction, make_builtin, parse_young_spec, estimate_indices, certify_all
from .fields import GridField, AnalyticField, Zero, PowerDecay, reflect, load_field, save_field
from .operator import OperatorParams, KernelModel, eval_fracg, eval_on_grid, GridOperator
from .solver import Nonlinearity, Problem, SolverConfig, ball_problem, solve_dirichlet, refine_study

__version__ = "0.1.0"

__all__ = [
    "YoungFunction", "make_builtin", "parse_young_spec", "estimate_indices", "certify_all",
    "GridField", "AnalyticField", "Zero", "PowerDecay", "reflect", "load_field", "save_field",
    "OperatorParams", "KernelModel", "eval_fracg", "eval_on_grid", "GridOperator",
    "Nonlinearity", "Problem", "SolverConfig", "ball_problem", "solve_dirichlet", "refine_study",
]
