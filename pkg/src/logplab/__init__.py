"""Numerical laboratory for the logarithmic p-Laplacian.

Modules: ``constants`` (normalisation constants), ``geometry`` (domains and
the boundary weight h_Omega), ``grid`` and ``quadrature`` (piecewise-constant
discretisation and exact pair weights), ``operator`` (pointwise operator
evaluation), ``energy`` (discrete energies and eigenvalues), ``whitney``
(Whitney decompositions and the boundary Hardy inequality) and ``cli``.
"""

from .constants import (ProblemParams, digamma_fn, frac_constant, g_map, gamma_fn,
                        kernel_constant, rho_constant, special_constants)
from .errors import ConvergenceError, DomainError, LogpError, NonconvexError, QuadratureError
from .geometry import Ball, Box, BoxUnion, domain_from_dict, h_lower_bound, h_omega, interval
from .grid import Grid, GridFunction
from .operator import ScalarField, derivative_check, log_p_laplacian, log_p_laplacian_domain
from .energy import (RayleighOptions, assemble_frac, assemble_log, dirichlet_solve,
                     eigen_derivative, faber_krahn_experiment, min_rayleigh)
from .whitney import (DyadicCube, HalfSpace, halfspace_pairing, hardy_sides,
                      verify_conditions, whitney_decompose)

__version__ = "0.1.0"
