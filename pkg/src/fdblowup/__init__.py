"""Singular solutions of the fast diffusion equation u_t = Lap(u^m) with point blow-up."""
from .core import (BLOWUP, CONVERGE_CONSTANT, CONVERGE_HARMONIC, OUTSIDE, Annulus, Ball,
                   BoundaryProfile, Box, Field, ModelParams, RegimeReport, SingularPoint,
                   Trajectory, classify_regime, compute_delta0, critical_exponents, make_grid,
                   probe_mask)
from .errors import (ConfigError, DiagnosticError, DiscretizationError, DomainError,
                     FDBlowupError, ParameterError, PositivityError, ShapeError, SolverError)
from .initial_data import build_u0, lift, lift_boundary, regularize, sample_to_grid, truncate
from .solver import (LimitSchedule, SolverConfig, double_limit_run, exact_singular_solution,
                     pde_residual, run_regularized, solve, step_implicit)

__version__ = "0.1.0"
