"""Spectrally regularized slope estimator and regularization schedules.

The estimator is ``beta_hat = T^{1/2} g_lam(Lambda_hat) T^{1/2} R_hat`` with
``Lambda_hat = T^{1/2} C_hat T^{1/2}``, ``C_hat = X^T X / n`` and
``R_hat = X^T y / n``.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .filters import eval_filter, get_filter
from .operators import SpectralOperator, effective_dimension, frac_power, sandwich

__all__ = [
    "FitResult",
    "ConditioningError",
    "SETTINGS",
    "canonical_order",
    "empirical_covariance",
    "empirical_xy",
    "fit_flr",
    "fit_tikhonov_representer",
    "rate_parameter",
    "schedule_exponent",
    "choose_lambda_theorem",
    "choose_lambda_oracle",
    "noise_term_norm",
    "noise_term_bound",
    "concentration_norm",
]

log = logging.getLogger(__name__)

SETTINGS = (
    "commutative-estimation",
    "commutative-estimation-rkhs",
    "commutative-prediction",
    "noncommutative-estimation",
    "noncommutative-prediction",
)


class ConditioningError(ArithmeticError):
    pass


@dataclass
class FitResult:
    beta_hat: np.ndarray
    lambda_used: float
    filter_kind: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "beta_hat": [float(v) for v in self.beta_hat],
            "lambda_used": float(self.lambda_used),
            "filter_kind": self.filter_kind,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_design(x, y=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"x_coeffs must be a nonempty 2-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x_coeffs has non-finite entries")
    if y is None:
        return x, None
    y = np.asarray(y, dtype=float)
    if y.shape != (x.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({x.shape[0]},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("y has non-finite entries")
    return x, y


def canonical_order(x, y=None) -> np.ndarray:
    """Row order that depends only on the multiset of rows.

    Rows are sorted by their first coordinate, then by ``y``; exact ties
    fall back to a full lexicographic sort.  Accumulating the moments in
    this order makes the estimate bit-identical under any permutation of
    the sample.
    """
    x = np.asarray(x)
    keys = [x[:, 0]] if y is None else [np.asarray(y), x[:, 0]]
    order = np.lexsort(keys)
    first = x[order, 0]
    tied = first[1:] == first[:-1]
    if y is not None:
        tied &= np.asarray(y)[order][1:] == np.asarray(y)[order][:-1]
    if np.any(tied):
        cols = x.T[::-1]
        full = cols if y is None else np.vstack([np.asarray(y)[None, :], cols])
        order = np.lexsort(full)
    return order


def empirical_covariance(x_coeffs) -> SpectralOperator:
    """``C_hat = X^T X / n``."""
    x, _ = _check_design(x_coeffs)
    x = x[canonical_order(x)]
    c = x.T @ x / x.shape[0]
    return SpectralOperator(0.5 * (c + c.T))


def empirical_xy(x_coeffs, y) -> np.ndarray:
    """``R_hat = X^T y / n``."""
    x, y = _check_design(x_coeffs, y)
    order = canonical_order(x, y)
    return x[order].T @ y[order] / x.shape[0]


def fit_flr(T, x_coeffs, y, family, lam: float, *, warn_on_clamp: bool = True) -> FitResult:
    """Regularized slope estimate.

    Parameters
    ----------
    T : SpectralOperator
        Kernel integral operator in the coefficient basis.
    x_coeffs : ndarray, shape (n, M)
    y : ndarray, shape (n,)
    family : str or FilterFamily
    lam : float
        Regularization parameter.  Values above ``eta = lambda_max(Lambda_hat)``
        are clamped to ``eta`` and flagged in ``diagnostics["clamped"]``.
    warn_on_clamp : bool
        Log a warning when clamping.  Batch callers that count clamped fits
        themselves turn it off.

    Returns
    -------
    FitResult
    """
    T = T if isinstance(T, SpectralOperator) else SpectralOperator(T)
    family = get_filter(family)
    x, y = _check_design(x_coeffs, y)
    if x.shape[1] != T.dim:
        raise ValueError(f"x has {x.shape[1]} coordinates, T has dim {T.dim}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    n = x.shape[0]
    order = canonical_order(x, y)
    x, y = x[order], y[order]
    c_hat = x.T @ x / n
    r_hat = x.T @ y / n

    root = frac_power(T, 0.5).matrix
    lam_hat = sandwich(T, SpectralOperator(0.5 * (c_hat + c_hat.T)))
    eta = lam_hat.max_eigenvalue
    clamped = False
    if eta <= 0.0:
        # C_hat = 0 means every covariate vanished, so R_hat = 0 as well
        return FitResult(np.zeros(T.dim), float(lam), family.name, {
            "eff_dim": 0.0, "lambda_hat_max_eig": 0.0, "n": n, "clamped": False,
        })
    if lam > eta:
        level = logging.WARNING if warn_on_clamp else logging.DEBUG
        log.log(level, "lambda=%.4g exceeds lambda_max(Lambda_hat)=%.4g; clamped", lam, eta)
        lam, clamped = eta, True
    w, u = lam_hat.eigenvalues, lam_hat.eigenvectors
    g = eval_filter(family, lam, np.minimum(w, eta), eta)
    z = root @ r_hat
    beta = root @ (u @ (g * (u.T @ z)))
    diagnostics = {
        "eff_dim": effective_dimension(lam_hat, lam),
        "lambda_hat_max_eig": float(eta),
        "n": int(n),
        "clamped": clamped,
    }
    return FitResult(beta, float(lam), family.name, diagnostics)


def fit_tikhonov_representer(T, x_coeffs, y, lam: float) -> FitResult:
    """Tikhonov estimate through the ``n x n`` kernel system.

    Solves ``(G / n + lam I) a = y`` with ``G = X T X^T`` and returns
    ``beta_hat = T X^T a / n``.  ``T`` may be a SpectralOperator or an
    analytic eigensystem (then truncated to the width of ``x_coeffs``).
    """
    x, y = _check_design(x_coeffs, y)
    if hasattr(T, "operator"):
        T = T.operator(x.shape[1])
    elif not isinstance(T, SpectralOperator):
        T = SpectralOperator(T)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    n = x.shape[0]
    order = canonical_order(x, y)
    x, y = x[order], y[order]
    xt = x @ T.matrix
    gram = xt @ x.T
    system = 0.5 * (gram + gram.T) / n + lam * np.eye(n)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            a = scipy.linalg.solve(system, y, assume_a="pos")
    except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"kernel system is ill-conditioned at lambda={lam:.3g}: {exc}") from None
    beta = xt.T @ a / n
    return FitResult(beta, float(lam), "tikhonov", {"n": int(n), "representer": True})


def rate_parameter(setting: str, params: dict) -> float:
    """Effective smoothness ``r`` after saturation at the qualification.

    ``params`` holds ``t, c`` (commutative) or ``b`` (non-commutative),
    ``alpha`` or ``s``, and ``nu`` (``math.inf`` allowed).
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    nu = float(params.get("nu", 1.0))
    if setting.startswith("commutative"):
        t, c, alpha = (float(params[k]) for k in ("t", "c", "alpha"))
        if setting == "commutative-estimation":
            cap = nu + (c / t) * (nu - 0.5)
        elif setting == "commutative-estimation-rkhs":
            if alpha < 0.5:
                raise ValueError("the RKHS-norm rate requires alpha >= 1/2")
            cap = nu + (c / t) * nu + 0.5
        elif setting == "commutative-prediction":
            cap = nu + 0.5 + nu * c / t
        else:
            raise ValueError(f"unknown setting {setting!r}")
        return min(alpha, cap)
    s = float(params["s"])
    if setting == "noncommutative-estimation":
        return min(s, nu)
    if setting == "noncommutative-prediction":
        return min(s, nu - 0.5)
    raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")


def schedule_exponent(setting: str, params: dict) -> float:
    """``e`` in ``lam = n^{-e}``."""
    r = rate_parameter(setting, params)
    if setting.startswith("commutative"):
        t, c = float(params["t"]), float(params["c"])
        return (t + c) / (1 + c + 2 * t * r)
    b = float(params["b"])
    return b / (1 + b + 2 * r * b)


def choose_lambda_theorem(setting: str, n: int, params: dict) -> float:
    """Rate schedule ``lam = n^{-e}`` with unit constant.

    Examples
    --------
    >>> lam = choose_lambda_theorem("commutative-estimation", 128,
    ...                             dict(t=4, c=2, alpha=0.5, nu=1))
    >>> round(lam, 12)
    0.015625
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n!r}")
    e = schedule_exponent(setting, params)
    return float(n) ** (-e)


def choose_lambda_oracle(truth, dataset, family, metric, lambda_grid, T=None) -> float:
    """Grid value of ``lam`` minimizing a true-error metric.

    ``metric`` is ``"l2"``, ``"rkhs"``, ``"pred"`` or a callable mapping
    ``(beta_hat - beta_star, truth)`` to a nonnegative error.  Ties resolve
    to the earliest grid point.
    """
    if isinstance(metric, str):
        from .metrics import metric_function

        metric = metric_function(metric)
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    T = truth.T if T is None else T
    best, best_err = grid[0], math.inf
    for lam in grid:
        fit = fit_flr(T, dataset.x_coeffs, dataset.y, family, lam)
        err = metric(fit.beta_hat - truth.beta_star, truth)
        if err < best_err:
            best, best_err = lam, err
    return best


def _resolvent_root(lam_op: SpectralOperator, lam: float) -> SpectralOperator:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    return lam_op.spectral_map(1.0 / np.sqrt(lam_op.eigenvalues + lam))


def noise_term_norm(T, Lambda, x_coeffs, y, beta_star, lam: float) -> float:
    """``||(Lambda + lam I)^{-1/2} T^{1/2} (R_hat - C_hat beta_star)||``.

    This is the sampling-noise part of the normal equation.  With noise
    variance ``sigma^2`` its second moment is at most
    ``sigma^2 N(lam) / n``, so Chebyshev bounds it by
    :func:`noise_term_bound` with probability ``1 - delta``.
    """
    T = T if isinstance(T, SpectralOperator) else SpectralOperator(T)
    Lambda = Lambda if isinstance(Lambda, SpectralOperator) else SpectralOperator(Lambda)
    resid = empirical_xy(x_coeffs, y) - empirical_covariance(x_coeffs).apply(beta_star)
    v = _resolvent_root(Lambda, lam).apply(frac_power(T, 0.5).apply(resid))
    return float(np.linalg.norm(v))


def noise_term_bound(Lambda, sigma: float, n: int, lam: float, delta: float) -> float:
    """``sqrt(sigma^2 N(lam) / (n delta))``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    return math.sqrt(sigma ** 2 * effective_dimension(Lambda, lam) / (n * delta))


def concentration_norm(Lambda, Lambda_hat, lam: float) -> float:
    """``||(Lambda + lam I)^{-1/2} (Lambda - Lambda_hat) (Lambda + lam I)^{-1/2}||`` (operator norm)."""
    Lambda = Lambda if isinstance(Lambda, SpectralOperator) else SpectralOperator(Lambda)
    lh = Lambda_hat.matrix if isinstance(Lambda_hat, SpectralOperator) else np.asarray(Lambda_hat, dtype=float)
    r = _resolvent_root(Lambda, lam).matrix
    d = r @ (Lambda.matrix - 0.5 * (lh + lh.T)) @ r
    return float(np.linalg.norm(0.5 * (d + d.T), 2))
