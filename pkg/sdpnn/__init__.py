"""Convex (lifted SDP) training of two-layer ReLU networks."""

from .conic_solver import SolverOptions, solve
from .errors import SdpNnError
from .lifted import LiftedProblem, LiftedSolution, SolverStatus, build_problem
from .network import NetworkWeights, SgdConfig, sgd_train
from .rounding import RoundingOptions, extract_weights, tos_round

__version__ = "0.1.0"

__all__ = [
    "LiftedProblem",
    "LiftedSolution",
    "NetworkWeights",
    "RoundingOptions",
    "SdpNnError",
    "SgdConfig",
    "SolverOptions",
    "SolverStatus",
    "build_problem",
    "extract_weights",
    "sgd_train",
    "solve",
    "tos_round",
]
