"""Inertial Newton dynamics (DIN) and its Euler discretization (INNA) near saddle points."""

from .dynamics import (
    PhaseState,
    Termination,
    Trajectory,
    din_field,
    din_integrate,
    gd_run,
    inna_run,
    inna_run_vanishing,
    inna_step,
    lyapunov_constants,
    lyapunov_energy,
    stationarity_residual,
)
from .landscape import CriticalLabel, Landscape, builtin, classify_critical, fd_gradient, fd_hessian
from .spectrum import (
    HyperParams,
    Regime,
    classify_stationary,
    din_block_eigs,
    gamma_convergence_bound,
    gamma_diffeo_bound,
    inna_block_eigs,
    permutation_matrix,
    spiral_frequency,
    spiral_interval,
)

__all__ = [
    "CriticalLabel", "HyperParams", "Landscape", "PhaseState", "Regime", "Termination", "Trajectory",
    "builtin", "classify_critical", "classify_stationary", "din_block_eigs", "din_field", "din_integrate",
    "fd_gradient", "fd_hessian", "gamma_convergence_bound", "gamma_diffeo_bound", "gd_run", "inna_block_eigs",
    "inna_run", "inna_run_vanishing", "inna_step", "lyapunov_constants", "lyapunov_energy",
    "permutation_matrix", "spiral_frequency", "spiral_interval", "stationarity_residual",
]

__version__ = "0.1.0"
