"""Unstable compactly supported vortices for the forced 2D Euler equation.

The piecewise-constant two-jump vortex has an explicit unstable eigenvalue on
the angular mode ``n``; mollifying its jumps over collars of width ``eps``
keeps the instability, which is computed by a contraction iteration and
checked by residuals, linear time evolution and a self-similar spectral
continuation.
"""

from .errors import (
    BranchLost,
    BundleError,
    ContractionFailure,
    DomainError,
    InstabilityLost,
    InstabilityNotFound,
    NumericalError,
    VortexError,
)
from .kernel import KernelQuery, RadialField, apply_radial_velocity, kn_closed, kn_quadrature
from .regularization import (
    RegularizedProfiles,
    RescaledSolution,
    build_mollifier,
    build_operators,
    fixed_point,
    regularized_profiles,
)
from .selfsimilar import SelfSimilarParams, assemble_Lb, continue_in_b, spectrum_near
from .verifier import assemble_eigen_field, evolve_linear, rayleigh_residual
from .vortex import (
    EigenPair,
    VortexParams,
    build_vortex,
    char_poly,
    discriminant_p,
    eigenpair,
    find_unstable_xi,
    matrix_a,
)

__version__ = "0.1.0"
