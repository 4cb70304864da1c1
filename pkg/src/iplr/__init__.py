"""Relaxed interior-point solver for low-rank semidefinite programs.

The primal iterate is kept in the implicit form X = mu*I + U U^T, so the
solver works with an n x r factor instead of a dense n x n matrix while the
barrier parameter mu drives X toward a rank-r solution. A specialized
constraint operator and experiment pipeline cover SDP reformulations of
matrix completion.
"""

from .inner import InnerConfig
from .outer import SolveReport, SolverConfig, iplr_solve
from .problem import (
    GroundTruth,
    LowRankPrimal,
    SdpProblem,
    build_mc_problem,
    default_sample_count,
    extract_recovered,
    generate_conditioned,
    generate_random_lowrank,
    perturb_singular_values,
    sample_omega,
    add_noise,
)

__all__ = [
    "InnerConfig",
    "SolverConfig",
    "SolveReport",
    "iplr_solve",
    "SdpProblem",
    "LowRankPrimal",
    "GroundTruth",
    "build_mc_problem",
    "default_sample_count",
    "generate_random_lowrank",
    "generate_conditioned",
    "perturb_singular_values",
    "sample_omega",
    "add_noise",
    "extract_recovered",
]

__version__ = "0.1.0"
