"""Error functionals for slope estimates.

Coefficients are taken in an L2-orthonormal basis, so the L2 norm is the
Euclidean norm of the coefficient vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import SpectralOperator

__all__ = [
    "ErrorTriple",
    "PSEUDO_INVERSE_RTOL",
    "NULL_MASS_TOL",
    "l2_error",
    "rkhs_error",
    "prediction_error",
    "error_triple",
    "metric_function",
    "METRICS",
]

PSEUDO_INVERSE_RTOL = 1e-12
NULL_MASS_TOL = 1e-8
METRICS = ("l2", "rkhs", "pred")


def _vector(delta) -> np.ndarray:
    d = np.asarray(delta, dtype=float)
    if d.ndim != 1:
        raise ValueError(f"delta must be a vector, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("delta has non-finite entries")
    return d


def l2_error(delta) -> float:
    """``||delta||_{L2}``."""
    return float(np.linalg.norm(_vector(delta)))


def rkhs_error(delta, T: SpectralOperator) -> float | None:
    """``sqrt(delta^T T^+ delta)``, or ``None`` when ``delta`` is not in the RKHS.

    The pseudo-inverse keeps eigenvalues above ``1e-12 * lambda_max(T)``.
    If more than ``1e-8`` of ``||delta||^2`` sits in the discarded
    eigenspace, the RKHS norm is undefined and ``None`` is returned.
    """
    d = _vector(delta)
    if d.shape[0] != T.dim:
        raise ValueError(f"delta has {d.shape[0]} coordinates, T has dim {T.dim}")
    total = float(d @ d)
    if total == 0.0:
        return 0.0
    mu = T.eigenvalues
    keep = mu > PSEUDO_INVERSE_RTOL * T.max_eigenvalue
    proj = T.eigenvectors.T @ d
    null_mass = float(proj[~keep] @ proj[~keep])
    if null_mass > NULL_MASS_TOL * total:
        return None
    return math.sqrt(float(np.sum(proj[keep] ** 2 / mu[keep])))


def prediction_error(delta, C: SpectralOperator) -> float:
    """``delta^T C delta = E <delta, X>^2``, the excess prediction risk."""
    d = _vector(delta)
    if d.shape[0] != C.dim:
        raise ValueError(f"delta has {d.shape[0]} coordinates, C has dim {C.dim}")
    # through the eigensystem so the value is a sum of nonnegative terms
    proj = C.eigenvectors.T @ d
    return float(np.sum(C.eigenvalues * proj**2))


@dataclass(frozen=True)
class ErrorTriple:
    l2: float
    rkhs: float | None
    pred: float

    def get(self, metric: str):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        return getattr(self, metric)


def error_triple(beta_hat, beta_star, T: SpectralOperator, C: SpectralOperator) -> ErrorTriple:
    delta = np.asarray(beta_hat, dtype=float) - np.asarray(beta_star, dtype=float)
    return ErrorTriple(l2_error(delta), rkhs_error(delta, T), prediction_error(delta, C))


def metric_function(name: str):
    """``f(delta, truth)`` for a metric name; ``truth`` has ``T`` and ``C``."""
    if name == "l2":
        return lambda d, truth: l2_error(d)
    if name == "rkhs":
        def rk(d, truth):
            v = rkhs_error(d, truth.T)
            return math.inf if v is None else v

        return rk
    if name == "pred":
        return lambda d, truth: prediction_error(d, truth.C)
    raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}")
