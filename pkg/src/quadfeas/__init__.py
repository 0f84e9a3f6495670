"""Quadratic feasibility ``x^H A_i x = c_i`` over complex vectors.

Recovery of ``x`` up to a global phase by gradient descent on the squared
residual loss, together with Monte-Carlo checks of identifiability and of the
loss landscape.
"""

from .core import (
    AlignedDifference,
    DimensionError,
    HermitianMatrix,
    aligned_delta,
    equiv_distance,
    equiv_distance_sq_fast,
    optimal_phase,
)
from .loss import LossProblem, gradient_norm, hessian_quadratic_form, loss, wirtinger_gradient
from .measurement import (
    MeasurementEnsemble,
    MeasurementVector,
    add_noise,
    forward_map,
    sample_ensemble,
    sample_hermitian_gaussian,
    sample_rank_one,
)
from .solver import RecoveryResult, SolverConfig, SolverTrace, recovery_error, solve

__version__ = "0.1.0"
BUILD = f"quadfeas-{__version__}"

__all__ = [
    "AlignedDifference",
    "DimensionError",
    "HermitianMatrix",
    "aligned_delta",
    "equiv_distance",
    "equiv_distance_sq_fast",
    "optimal_phase",
    "LossProblem",
    "gradient_norm",
    "hessian_quadratic_form",
    "loss",
    "wirtinger_gradient",
    "MeasurementEnsemble",
    "MeasurementVector",
    "add_noise",
    "forward_map",
    "sample_ensemble",
    "sample_hermitian_gaussian",
    "sample_rank_one",
    "RecoveryResult",
    "SolverConfig",
    "SolverTrace",
    "recovery_error",
    "solve",
]
