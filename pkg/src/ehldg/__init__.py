"""Discontinuous Galerkin solver for elastohydrodynamic line and point contacts."""
from .assembly import FormParams, assemble_newton, assemble_picard, coercivity_probe, residual
from .dgspace import DgField, DgSpace, broken_norm, broken_norm_nu, integral, interpolate, l2_error
from .errors import (ConfigError, ConvergenceError, EhlError, EvaluationError, FilmCollapseError,
                     LinearSolveError, MeshError, MeshMismatchError, ParameterDomainError)
from .mesh import DomainSpec, Mesh, build, refine_uniform
from .params import DerivedParams, PhysicalInputs, derive, paper_defaults
from .penalty import PenaltyConfig, continuation_schedule, xi, xi_derivative
from .physics import Lubricant, ReynoldsCoefficients, build_kernel, film_thickness, force_balance_residual
from .solver import SolveConfig, SolveReport, hertz_guess, solve_inner, solve_with_force_balance

__version__ = "0.1.0"
