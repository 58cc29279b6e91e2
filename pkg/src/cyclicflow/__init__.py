"""Time-periodic states of the Stokes and Navier-Stokes equations.

Forward cycling and the averaging acceleration on a staggered grid, plus
the scalar per-mode model that predicts their contraction rates.
"""

from .cycler import (
    CycleReport,
    RunResult,
    averaging_iterate,
    convergence_rate,
    forward_iterate,
    spectral_oracle_check,
)
from .grid import BoundarySpec, FlowState, GridSpec, StaggeredGrid, VelocityField, build_grid, norm_l2
from .modemodel import (
    DiscreteSchemeParams,
    ModeParams,
    ReductionReport,
    mode_forward_factor,
    rho_continuous,
    rho_discrete,
    simulate_mode_scheme,
    sup_abs_reduction,
    theta_shifted,
)
from .saddle import EigenPair, compute_stokes_spectrum, solve_oseen_update, solve_stokes_stationary
from .stepper import CycleTrace, FlowScenario, ThetaConfig, ThetaStepper, run_cycle, theta_step

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec",
    "CycleReport",
    "CycleTrace",
    "DiscreteSchemeParams",
    "EigenPair",
    "FlowScenario",
    "FlowState",
    "GridSpec",
    "ModeParams",
    "ReductionReport",
    "RunResult",
    "StaggeredGrid",
    "ThetaConfig",
    "ThetaStepper",
    "VelocityField",
    "averaging_iterate",
    "build_grid",
    "compute_stokes_spectrum",
    "convergence_rate",
    "forward_iterate",
    "mode_forward_factor",
    "norm_l2",
    "rho_continuous",
    "rho_discrete",
    "run_cycle",
    "simulate_mode_scheme",
    "solve_oseen_update",
    "solve_stokes_stationary",
    "spectral_oracle_check",
    "sup_abs_reduction",
    "theta_shifted",
    "theta_step",
]
