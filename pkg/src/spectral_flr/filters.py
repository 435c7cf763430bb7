"""Spectral regularization families.

A family is a map ``lam -> g_lam`` where ``g_lam(sigma)`` approximates
``1/sigma`` on the spectrum ``[0, eta]`` of the operator being inverted.
The residual is ``r_lam(sigma) = 1 - sigma * g_lam(sigma)``.

Four families are provided: Tikhonov, spectral cut-off, Showalter
(asymptotic regularization) and Landweber iteration.  Every evaluation is
vectorized over ``sigma``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "FilterKind",
    "FilterFamily",
    "FilterDomainError",
    "FilterNumericalError",
    "Certificate",
    "TIKHONOV",
    "CUTOFF",
    "SHOWALTER",
    "LANDWEBER",
    "get_filter",
    "landweber_steps",
    "landweber_partial_sum",
    "eval_filter",
    "eval_residual",
    "certify_constants",
]

# relative slack on the spectral domain; eigensolvers return lambda_max
# perturbed at the level of machine epsilon
_DOMAIN_RTOL = 1e-12
# slack allowed between a grid supremum and the declared constant
CONSTANT_RTOL = 1e-6


class FilterDomainError(ValueError):
    """Raised when ``lam`` or ``sigma`` lies outside ``(0, eta]`` / ``[0, eta]``."""


class FilterNumericalError(ArithmeticError):
    """Raised when a filter evaluation is not finite."""

    def __init__(self, family, lam, sigma):
        self.family = family
        self.lam = lam
        self.sigma = sigma
        super().__init__(
            f"non-finite {family} evaluation at lambda={lam!r}, sigma={sigma!r}"
        )


class FilterKind(str, enum.Enum):
    TIKHONOV = "tikhonov"
    CUTOFF = "cutoff"
    SHOWALTER = "showalter"
    LANDWEBER = "landweber"


@dataclass(frozen=True)
class FilterFamily:
    """A regularization family with its declared constants.

    Parameters
    ----------
    kind : FilterKind
        Which closed form to use.
    qualification : float
        Largest power ``p`` for which ``|r_lam(sigma)| sigma^p <= omega_p lam^p``
        holds uniformly; ``math.inf`` for unbounded qualification.
    A, B, D : float
        Declared bounds on ``|sigma g|``, ``lam |g|`` and ``|r|``.
    max_iterations : int or None
        Optional cap on the Landweber step count (ignored by the other
        kinds).  Evaluation uses the closed form, so no cap is needed; a cap
        breaks the qualification bound once ``lam < eta / max_iterations``.
    """

    kind: FilterKind
    qualification: float
    A: float = 1.0
    B: float = 1.0
    D: float = 1.0
    max_iterations: int | None = None

    @property
    def name(self) -> str:
        return self.kind.value

    def omega(self, p: float) -> float | None:
        """Declared qualification constant ``omega_p``, or None when ``p > nu``."""
        if p > self.qualification:
            return None
        if self.kind is FilterKind.TIKHONOV:
            # sup_s lam s^p / (s + lam) / lam^p = p^p (1-p)^(1-p) for p <= 1
            return 1.0 if p in (0.0, 1.0) else p**p * (1.0 - p) ** (1.0 - p)
        if self.kind is FilterKind.CUTOFF:
            return 1.0
        if self.kind is FilterKind.SHOWALTER:
            return (p / math.e) ** p if p > 0 else 1.0
        return p**p if p > 0 else 1.0

    def __str__(self) -> str:
        return self.name


TIKHONOV = FilterFamily(FilterKind.TIKHONOV, qualification=1.0)
CUTOFF = FilterFamily(FilterKind.CUTOFF, qualification=math.inf)
SHOWALTER = FilterFamily(FilterKind.SHOWALTER, qualification=math.inf)
LANDWEBER = FilterFamily(FilterKind.LANDWEBER, qualification=math.inf)

_BY_NAME = {f.name: f for f in (TIKHONOV, CUTOFF, SHOWALTER, LANDWEBER)}


def get_filter(name: str | FilterFamily) -> FilterFamily:
    """Look a family up by its config name (``"tikhonov"``, ``"cutoff"``, ...)."""
    if isinstance(name, FilterFamily):
        return name
    try:
        return _BY_NAME[str(name).strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown filter {name!r}; expected one of {sorted(_BY_NAME)}"
        ) from None


def landweber_steps(lam: float, eta: float = 1.0, cap: int | None = None) -> int:
    """Iteration count identified with ``lam`` for a spectrum scaled to ``[0, 1]``.

    ``t = floor(eta / lam)``, at least 1 and at most ``cap`` when given.  Rounding down
    keeps ``lam * t / eta <= 1`` so the bound ``|g| <= 1/lam`` holds exactly.
    """
    ratio = eta / lam
    # absorb representation error so that e.g. 1/(1/3) counts as 3 steps
    t = math.floor(ratio * (1.0 + 1e-12))
    t = max(t, 1)
    return int(t if cap is None else min(t, cap))


def landweber_partial_sum(t: int, x):
    """Closed form of ``sum_{i=0}^{t-1} (1 - x)^i`` for ``x`` in ``[0, 2)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.5
    zero = x == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x[small & ~zero]
        out[small & ~zero] = -np.expm1(t * np.log1p(-xs)) / xs
        xl = x[~small]
        out[~small] = (1.0 - (1.0 - xl) ** t) / xl
    out[zero] = float(t)
    return out


def _check_domain(lam, sigma, eta):
    if not (lam > 0) or not np.isfinite(lam):
        raise FilterDomainError(f"lambda must be positive and finite, got {lam!r}")
    if not (eta > 0):
        raise FilterDomainError(f"eta must be positive, got {eta!r}")
    if lam > eta * (1 + _DOMAIN_RTOL):
        raise FilterDomainError(f"lambda={lam!r} exceeds eta={eta!r}")
    s = np.asarray(sigma, dtype=float)
    if np.any(s < 0):
        raise FilterDomainError(f"sigma must be nonnegative, min={s.min()!r}")
    if np.any(s > eta * (1 + _DOMAIN_RTOL)):
        raise FilterDomainError(f"sigma exceeds eta={eta!r}, max={s.max()!r}")
    return np.minimum(s, eta)


def eval_filter(family, lam: float, sigma, eta: float = 1.0):
    """Evaluate ``g_lam(sigma)``.

    ``eta`` is an upper bound on the spectrum.  It only changes the result
    for Landweber, which iterates on the spectrum rescaled to ``[0, 1]``.

    Returns a float for scalar ``sigma`` and an array otherwise.
    """
    family = get_filter(family)
    scalar = np.ndim(sigma) == 0
    s = _check_domain(lam, sigma, eta)
    kind = family.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is FilterKind.TIKHONOV:
            g = 1.0 / (s + lam)
        elif kind is FilterKind.CUTOFF:
            g = np.where(s >= lam, 1.0 / np.where(s > 0, s, 1.0), 0.0)
        elif kind is FilterKind.SHOWALTER:
            g = np.where(s > 0, -np.expm1(-s / lam) / np.where(s > 0, s, 1.0), 1.0 / lam)
        else:
            t = landweber_steps(lam, eta, family.max_iterations)
            g = landweber_partial_sum(t, s / eta) / eta
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(g)))[0]
        raise FilterNumericalError(family.name, lam, float(np.atleast_1d(s)[bad]))
    return float(g) if scalar else g


def eval_residual(family, lam: float, sigma, eta: float = 1.0):
    """Evaluate ``r_lam(sigma) = 1 - sigma g_lam(sigma)``.

    Closed forms are used where they avoid cancellation: ``lam/(sigma+lam)``
    for Tikhonov, ``exp(-sigma/lam)`` for Showalter, ``(1-sigma/eta)^t`` for
    Landweber.
    """
    family = get_filter(family)
    scalar = np.ndim(sigma) == 0
    s = _check_domain(lam, sigma, eta)
    kind = family.kind
    if kind is FilterKind.TIKHONOV:
        r = lam / (s + lam)
    elif kind is FilterKind.CUTOFF:
        r = np.where(s >= lam, 0.0, 1.0)
    elif kind is FilterKind.SHOWALTER:
        r = np.exp(-s / lam)
    else:
        t = landweber_steps(lam, eta, family.max_iterations)
        r = (1.0 - s / eta) ** t
    r = np.asarray(r, dtype=float)
    return float(r) if scalar else r


@dataclass
class Certificate:
    """Grid-certified filter constants.

    ``omega[p]`` is the grid supremum of ``|r| sigma^p / lam^p``;
    ``divergent[p]`` is True when that supremum keeps growing as the grid is
    extended towards zero, i.e. ``p`` lies beyond the family's qualification.
    """

    family: str
    eta: float
    A: float
    B: float
    D: float
    omega: dict = field(default_factory=dict)
    divergent: dict = field(default_factory=dict)
    exceeds_qualification: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not any(self.divergent.values()) and not self.violations

    def failures(self) -> list:
        """Human-readable reasons, each with the offending ``(lam, sigma)``."""
        out = []
        for p, bad in self.divergent.items():
            if bad:
                lam, sig = self.worst.get(f"omega_{p}", (float("nan"), float("nan")))
                out.append(
                    f"{self.family}: omega_{p:g} diverges as the grid is refined "
                    f"(sup {self.omega[p]:.4g} at lam={lam:.3g}, sigma={sig:.3g})"
                )
        out += self.violations
        return out

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "eta": self.eta,
            "A": self.A,
            "B": self.B,
            "D": self.D,
            "omega": {str(p): v for p, v in self.omega.items()},
            "divergent": {str(p): v for p, v in self.divergent.items()},
            "exceeds_qualification": {
                str(p): v for p, v in self.exceeds_qualification.items()
            },
            "worst": {k: list(v) for k, v in self.worst.items()},
            "violations": list(self.violations),
            "certified": self.certified,
        }


def _grids(eta, grid_size, n_lambda, sigma_decades, lambda_decades):
    sigma = eta * np.logspace(-sigma_decades, 0.0, grid_size)
    lams = eta * np.logspace(-lambda_decades, 0.0, n_lambda)
    return sigma, lams


def _suprema(family, eta, sigma, lams, p_list):
    best = dict.fromkeys(["A", "B", "D"] + [f"omega_{p}" for p in p_list], 0.0)
    worst = {}
    for lam in lams:
        g = eval_filter(family, lam, sigma, eta)
        r = np.abs(eval_residual(family, lam, sigma, eta))
        values = {"A": np.abs(sigma * g), "B": lam * np.abs(g), "D": r}
        for p in p_list:
            values[f"omega_{p}"] = r * (sigma / lam) ** p
        for key, vals in values.items():
            if not np.all(np.isfinite(vals)):
                k = int(np.flatnonzero(~np.isfinite(vals))[0])
                raise FilterNumericalError(family.name, float(lam), float(sigma[k]))
            k = int(np.argmax(vals))
            if vals[k] > best[key]:
                best[key] = float(vals[k])
                worst[key] = (float(lam), float(sigma[k]))
    omega = {p: best[f"omega_{p}"] for p in p_list}
    return best["A"], best["B"], best["D"], omega, worst


def certify_constants(
    family,
    eta: float = 1.0,
    p_list: Iterable[float] = (1.0,),
    grid_size: int = 512,
    n_lambda: int = 16,
    growth_tol: float = 0.1,
) -> Certificate:
    """Numerically certify the filter constants on a log grid.

    The base grid has ``grid_size`` log-spaced ``sigma`` in ``[1e-10 eta, eta]``
    and ``n_lambda`` log-spaced ``lam`` in ``[1e-6 eta, eta]``.  Divergence
    of ``omega_p`` is detected by re-running on a grid extended two decades
    further towards zero at the same density: a supremum that grows by more
    than ``growth_tol`` (relative) is not a constant.
    """
    family = get_filter(family)
    p_list = [float(p) for p in p_list]
    sigma, lams = _grids(eta, grid_size, n_lambda, 10.0, 6.0)
    A, B, D, omega, worst = _suprema(family, eta, sigma, lams, p_list)

    # same point density per decade, two more decades on each axis
    sigma_x, lams_x = _grids(
        eta,
        int(round(grid_size * 12 / 10)),
        int(round((n_lambda - 1) * 8 / 6)) + 1,
        12.0,
        8.0,
    )
    _, _, _, omega_x, _ = _suprema(family, eta, sigma_x, lams_x, p_list)

    divergent = {
        p: bool(omega_x[p] > (1.0 + growth_tol) * max(omega[p], np.finfo(float).tiny))
        for p in p_list
    }
    declared = {"A": family.A, "B": family.B, "D": family.D}
    declared.update({f"omega_{p}": family.omega(p) for p in p_list if not divergent[p]})
    found = {"A": A, "B": B, "D": D, **{f"omega_{p}": omega[p] for p in p_list}}
    violations = []
    for key, bound in declared.items():
        if bound is not None and found[key] > bound * (1.0 + CONSTANT_RTOL):
            lam, sig = worst.get(key, (float("nan"), float("nan")))
            violations.append(
                f"{family.name}: {key} = {found[key]:.6g} exceeds declared {bound:.6g} "
                f"at lam={lam:.3g}, sigma={sig:.3g}"
            )
    return Certificate(
        family=family.name,
        eta=float(eta),
        A=A,
        B=B,
        D=D,
        omega=omega,
        divergent=divergent,
        exceeds_qualification={p: p > family.qualification for p in p_list},
        worst=worst,
        violations=violations,
    )
