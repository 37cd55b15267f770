"""Spectral tools for front speeds and effective diffusivity in strong periodic flows."""

__version__ = "0.1.0"

from .cell import (
    CellSolution,
    CellSolveError,
    corrector_limit_estimate,
    diffusivity_identity_check,
    diffusivity_sweep,
    solve_cell_problem,
)
from .eigen import EigenResult, EigenSolveError, eigen_identities, mu_curve, principal_eigenpair
from .flows import (
    FlowField,
    cellular_flow,
    fourier_flow,
    shear_flow,
    shear_flow_from_profile,
    validate_flow,
    zero_flow,
)
from .limits import (
    LimitReport,
    NotAttained,
    diffusivity_limit_shear,
    find_lambda_for_f,
    gamma_curve,
    general_flow_limit_crosscheck,
    kappa_e_shear,
    large_f_limit,
    limit_report,
    small_f_limit,
    speed_limit_shear,
)
from .simulate import ChannelDomain, FrontTrajectory, measure_speed, simulate_front
from .speed import ReactionSpec, SpeedResult, fisher_kpp, minimal_speed, speed_sweep, validate_reaction
from .torus import Grid, ScalarField, VectorField, make_grid
