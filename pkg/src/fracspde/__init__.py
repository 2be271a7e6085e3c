"""Simulation and spectral maximum likelihood estimation for diagonalizable
parabolic equations driven by fractional Brownian noise with ``H >= 1/2``."""

from .spectral_model import (
    DomainError,
    Hurst,
    SpectralModel,
    UnsupportedOperation,
    check_gamma_summability,
    check_parabolicity,
    classify_consistency,
    first_positive_index,
    fisher_normalizer,
    heat_periodic,
    laplacian_plus_theta,
    model_from_dict,
    mu,
    preset,
)
from .fbm import FbmPath, TimeGrid, fbm_covariance, sample_fbm, sample_fbm_ensemble
from .fou import ModePath, fou_from_fbm, fou_variance_exact, stationary_limit
from .transform import (
    TransformedMode,
    clock,
    compute_M,
    compute_Q,
    compute_Z,
    kernel,
    kernel_constants,
    transform_mode,
    weighted_integral_psi,
)
from .estimators import (
    DegenerateDataError,
    EstimateResult,
    degenerate_exact,
    ergodic_all_modes,
    ergodic_single_mode,
    ergodic_truncation_tail,
    log_likelihood,
    longtime_single_mode,
    mle,
    mle_white,
    normalized_error,
)
from .laplace import bessel_i, delta_T, gamma_fn, lemma_limit_check, mean_energy, psi, var_energy

__version__ = "0.1.0"
