"""Functional linear regression with spectral regularization in an RKHS.

Modules
-------
filters       regularization families ``g_lam`` and their certified constants
operators     dense PSD operators, fractional powers, filter application
kernels       Brownian covariance, cubic kernel, quadrature, curve ingestion
simulate      scenarios and synthetic datasets
estimator     the regularized slope estimator and lambda schedules
metrics       L2, RKHS and prediction errors
rates         Monte Carlo rate experiments and reports
lower_bounds  hypothesis codebooks, separations and KL divergences
config        configuration schema, presets and seeds
cli           the ``flr`` command
"""
from .estimator import (
    FitResult,
    choose_lambda_oracle,
    choose_lambda_theorem,
    empirical_covariance,
    empirical_xy,
    fit_flr,
    fit_tikhonov_representer,
)
from .filters import (
    CUTOFF,
    LANDWEBER,
    SHOWALTER,
    TIKHONOV,
    FilterFamily,
    certify_constants,
    eval_filter,
    eval_residual,
    get_filter,
)
from .metrics import ErrorTriple, error_triple, l2_error, prediction_error, rkhs_error
from .operators import (
    SpectralOperator,
    apply_filter,
    effective_dimension,
    frac_power,
    sandwich,
    verify_jt_identity,
)
from .seeding import derive_stream
from .simulate import Dataset, Scenario, gen_dataset

__all__ = [
    "CUTOFF",
    "LANDWEBER",
    "SHOWALTER",
    "TIKHONOV",
    "Dataset",
    "ErrorTriple",
    "FilterFamily",
    "FitResult",
    "Scenario",
    "SpectralOperator",
    "apply_filter",
    "certify_constants",
    "choose_lambda_oracle",
    "choose_lambda_theorem",
    "derive_stream",
    "effective_dimension",
    "empirical_covariance",
    "empirical_xy",
    "error_triple",
    "eval_filter",
    "eval_residual",
    "fit_flr",
    "fit_tikhonov_representer",
    "frac_power",
    "gen_dataset",
    "get_filter",
    "l2_error",
    "prediction_error",
    "rkhs_error",
    "sandwich",
    "verify_jt_identity",
]

__version__ = "0.1.0"
