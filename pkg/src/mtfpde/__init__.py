"""L2-1sigma / P1 Galerkin solver for multi-term time-fractional nonlocal parabolic problems."""

__version__ = "0.1.0"

from .exceptions import ConfigurationError, NumericalFailure
from .gronwall import GronwallBoundParams, build_p, gronwall_rhs
from .kernel import build_kernel_table, check_kernel_properties, solve_sigma, truncation_experiment
from .problem import ProblemSpec, manufactured_problem
from .solver import FractionalNonlocalSolver, run
from .space import Interval, Rectangle, build_spatial_mesh
from .specfun import FractionalOrders, mittag_leffler
from .tmesh import build_graded_mesh, check_stepsize_criterion

__all__ = [
    "ConfigurationError",
    "FractionalNonlocalSolver",
    "FractionalOrders",
    "GronwallBoundParams",
    "Interval",
    "NumericalFailure",
    "ProblemSpec",
    "Rectangle",
    "build_graded_mesh",
    "build_kernel_table",
    "build_p",
    "build_spatial_mesh",
    "check_kernel_properties",
    "check_stepsize_criterion",
    "gronwall_rhs",
    "manufactured_problem",
    "mittag_leffler",
    "run",
    "solve_sigma",
    "truncation_experiment",
]
