"""Phase field dynamics with damped thermal-displacement conduction.

1-D finite-difference solver for a coupled balance/phase system, discrete
Sobolev norms, and a harness that measures how fast the damped problem
approaches its undamped limit as the damping coefficient goes to zero.
"""

from .backend import NUMBA_ENABLED
from .grid import SpaceGrid, cumulative_time_integral, laplacian_neumann, make_grid, solve_helmholtz
from .monotone import (
    CouplingSpec,
    DoubleObstacle,
    DoubleWell,
    GraphSpec,
    Logarithmic,
    default_coupling,
    minimal_section,
    moreau,
    potential,
    resolvent,
    yosida,
)
from .norms import bochner, fit_rate, norm_h, norm_v, norm_vdual, norm_w
from .solver import (
    ProblemData,
    Trajectory,
    free_energy,
    parabolic_solve,
    reconstruct_physical,
    simulate,
    step,
)
from .experiments import (
    SCENARIOS,
    MmsReport,
    RateReport,
    Scenario,
    energy_monitor,
    get_scenario,
    mms_verify,
    rate_study,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "SpaceGrid", "make_grid", "laplacian_neumann", "solve_helmholtz",
    "cumulative_time_integral",
    "DoubleObstacle", "DoubleWell", "Logarithmic", "GraphSpec", "CouplingSpec",
    "default_coupling", "potential", "resolvent", "yosida", "moreau",
    "minimal_section",
    "norm_h", "norm_v", "norm_vdual", "norm_w", "bochner", "fit_rate",
    "ProblemData", "Trajectory", "simulate", "step", "parabolic_solve",
    "reconstruct_physical", "free_energy",
    "Scenario", "SCENARIOS", "get_scenario", "sweep", "rate_study",
    "mms_verify", "energy_monitor", "MmsReport", "RateReport",
    "__version__",
]
