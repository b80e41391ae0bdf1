"""
Gaussian Process Regression Package

Exact Matérn-5/2 GP regression, replicated independently per latent
dimension.
"""

from .bundle import GPConfig, InputScaler, LatentGPBundle, fit_bundle, predict_bundle
from .kernels import (
    Matern52Kernel,
    StationaryKernel,
    covariance_matrix,
    matern52,
    pairwise_distances,
)
from .model import (
    GPModel,
    Standardizer,
    condition,
    condition_standardized,
    constant_model,
    fit,
    initial_log_params,
    lml_gradient,
    log_marginal_likelihood,
    predict,
)

__all__ = [
    "GPConfig",
    "InputScaler",
    "LatentGPBundle",
    "fit_bundle",
    "predict_bundle",
    "Matern52Kernel",
    "StationaryKernel",
    "covariance_matrix",
    "matern52",
    "pairwise_distances",
    "GPModel",
    "Standardizer",
    "condition",
    "condition_standardized",
    "constant_model",
    "fit",
    "initial_log_params",
    "lml_gradient",
    "log_marginal_likelihood",
    "predict",
]
