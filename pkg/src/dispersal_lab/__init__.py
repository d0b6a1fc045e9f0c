"""Diffusive Lotka-Volterra competition on an interval.

Subpackages mirror the building blocks: ``grid`` (discretization), ``expr``
(text profiles), ``eigen`` (principal eigenpairs), ``dynamics`` (time
stepping and steady states), ``bundle`` (normalized principal bundles),
``experiments`` (scenario checks) and ``cli``.
"""

__version__ = "0.1.0"

from .grid import Field, Grid, build_grid, dirichlet_energy, integrate, laplacian_apply, neumann_laplacian, norm
from .expr import parse, sample
from .eigen import PrincipalPair, d_lambda_fd, d_lambda_formula, dense_spectrum, eigen_identity_residual, principal_eigenpair
from .dynamics import (
    ModelParams,
    SpeciesState,
    Trajectory,
    aggregate,
    constant_state,
    dt_max,
    equilibrium,
    integrate_to,
    solve_theta,
    step_imex,
)
from .bundle import (
    BundleTrajectory,
    CoefficientPath,
    bundle_d_derivative,
    compute_bundle,
    project_off_bundle,
    separation_rate,
)
from .experiments import (
    closeness_experiment,
    dockery_morse_check,
    exclusion_experiment,
    hausdorff_distance,
    invasion_matrix,
)
