"""Synthetic functional linear regression data.

Covariates are Gaussian processes represented by their coordinates in a
fixed orthonormal basis ``phi_1, ..., phi_M`` (a Karhunen-Loeve draw), and
responses follow ``y = <x, beta*> + sigma * noise``.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import BROWNIAN_COV, CUBIC_KERNEL
from .operators import SpectralOperator, frac_power, sandwich
from .seeding import derive_stream

__all__ = [
    "Scenario",
    "Truth",
    "Dataset",
    "sample_covariates",
    "fourth_moment_ratio",
    "default_h",
    "make_slope_commutative",
    "make_slope_noncommutative",
    "givens_mixing",
    "fit_decay_exponent",
    "make_noncommutative_pair",
    "build_truth",
    "gen_dataset",
    "save_dataset",
    "load_dataset",
]

MODES = ("commutative", "noncommutative")
SPECTRA = ("brownian-cubic", "power")


@dataclass(frozen=True)
class Scenario:
    """Complete description of a synthetic experiment.

    Parameters
    ----------
    mode : {"commutative", "noncommutative"}
        Whether the kernel operator ``T`` and the covariance ``C`` share
        eigenfunctions.
    spectrum : {"brownian-cubic", "power"}
        ``"brownian-cubic"`` uses the cubic-kernel eigenvalues for ``T``
        and the Brownian-covariance eigenvalues for ``C`` (``t = 4``,
        ``c = 2``).  ``"power"`` uses ``i^{-t}`` and ``i^{-c}``.
    M : int
        Truncation dimension.
    t, c : float
        Decay exponents of ``T`` and ``C``.
    alpha : float, optional
        Source exponent, ``beta* = T^alpha h`` (commutative mode).
    s : float, optional
        Source exponent, ``beta* = T^{1/2} Lambda^s h`` (non-commutative mode).
    sigma : float
        Noise standard deviation.
    filter : str
        Regularization family name.
    seed, mixing_seed : int
        Base seed of the data streams and of the Givens mixing angles.
    h_decay : float
        ``h_i`` proportional to ``i^{-h_decay}``, normalized.
    mixing_amplitude : float
        Givens angles are uniform on ``[-a, a]``.
    """

    mode: str = "commutative"
    spectrum: str = "brownian-cubic"
    M: int = 256
    t: float = 4.0
    c: float = 2.0
    alpha: float | None = 0.5
    s: float | None = None
    sigma: float = 1.0
    filter: str = "tikhonov"
    seed: int = 0
    mixing_seed: int = 0
    h_decay: float = 0.55
    mixing_amplitude: float = math.pi / 16

    def __post_init__(self):
        for name in ("t", "c", "sigma", "h_decay", "mixing_amplitude", "alpha", "s"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, bool) and isinstance(v, (int, float)):
                object.__setattr__(self, name, float(v))
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.spectrum not in SPECTRA:
            problems.append(f"spectrum must be one of {SPECTRA}, got {self.spectrum!r}")
        if self.spectrum == "brownian-cubic" and (self.t, self.c) != (4.0, 2.0):
            problems.append("the brownian-cubic spectrum fixes t = 4 and c = 2")
        if int(self.M) != self.M or self.M < 8:
            problems.append(f"M must be an integer >= 8, got {self.M!r}")
        if not (self.t > 1 and self.c > 1):
            problems.append(f"decay exponents must exceed 1, got t={self.t!r}, c={self.c!r}")
        if not self.sigma >= 0:
            problems.append(f"sigma must be nonnegative, got {self.sigma!r}")
        if self.mode == "commutative" and not (self.alpha is not None and self.alpha > 0):
            problems.append(f"commutative mode needs alpha > 0, got {self.alpha!r}")
        if self.mode == "noncommutative" and not (self.s is not None and self.s > 0):
            problems.append(f"non-commutative mode needs s > 0, got {self.s!r}")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "M", int(self.M))

    @property
    def smoothness(self) -> float:
        return self.alpha if self.mode == "commutative" else self.s

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Truth:
    beta_star: np.ndarray
    T: SpectralOperator
    C: SpectralOperator
    Lambda: SpectralOperator
    fitted_b: float

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star.tolist(),
            "T": self.T.to_json(),
            "C": self.C.to_json(),
            "Lambda": self.Lambda.to_json(),
            "fitted_b": self.fitted_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Truth":
        return cls(
            beta_star=np.asarray(d["beta_star"], dtype=float),
            T=SpectralOperator.from_json(d["T"]),
            C=SpectralOperator.from_json(d["C"]),
            Lambda=SpectralOperator.from_json(d["Lambda"]),
            fitted_b=float(d["fitted_b"]),
        )


@dataclass(frozen=True)
class Dataset:
    """``n`` covariate coefficient rows, responses, and optional truth."""

    x_coeffs: np.ndarray
    y: np.ndarray
    truth: Truth | None = None
    scenario: Scenario | None = None

    @property
    def n(self) -> int:
        return self.x_coeffs.shape[0]

    @property
    def M(self) -> int:
        return self.x_coeffs.shape[1]


def sample_covariates(C: SpectralOperator, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows ``x = U diag(sqrt(xi)) z`` with ``z`` standard normal."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n!r}")
    z = rng.standard_normal((n, C.dim))
    return (z * np.sqrt(C.eigenvalues)) @ C.eigenvectors.T


def fourth_moment_ratio(x_coeffs, direction) -> float:
    """Sample ``mean(<x, f>^4) / mean(<x, f>^2)^2`` along ``direction``.

    Equals 3 in expectation for Gaussian covariates.
    """
    proj = np.asarray(x_coeffs, dtype=float) @ np.asarray(direction, dtype=float)
    m2 = np.mean(proj ** 2)
    if m2 == 0:
        raise ValueError("direction is orthogonal to every sample")
    return float(np.mean(proj ** 4) / m2 ** 2)


def default_h(M: int, decay: float = 0.55) -> np.ndarray:
    h = np.arange(1, M + 1, dtype=float) ** (-decay)
    return h / np.linalg.norm(h)


def make_slope_commutative(alpha: float, mu, h) -> np.ndarray:
    """``beta*_i = mu_i^alpha h_i`` in the shared eigenbasis."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    mu = np.asarray(mu, dtype=float)
    h = np.asarray(h, dtype=float)
    if mu.shape != h.shape:
        raise ValueError(f"shape mismatch: mu {mu.shape} vs h {h.shape}")
    return mu**alpha * h


def make_slope_noncommutative(s: float, T, Lambda, h) -> np.ndarray:
    """``beta* = T^{1/2} Lambda^s h``."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    h = np.asarray(h, dtype=float)
    return frac_power(T, 0.5).apply(frac_power(Lambda, s).apply(h))


def givens_mixing(M: int, seed: int, amplitude: float = math.pi / 16, sweeps: int = 3) -> np.ndarray:
    """Orthogonal ``Q`` from ``sweeps * M`` adjacent-pair Givens rotations.

    Rotation ``k`` acts on coordinates ``(p, p + 1)`` with ``p = k mod (M - 1)``
    and an angle uniform on ``[-amplitude, amplitude]``.
    """
    angles = derive_stream(seed, [0]).uniform(-amplitude, amplitude, size=sweeps * M)
    q = np.eye(M)
    for k, th in enumerate(angles):
        p = k % (M - 1)
        cs, sn = math.cos(th), math.sin(th)
        rp, rq = q[p].copy(), q[p + 1].copy()
        q[p] = cs * rp - sn * rq
        q[p + 1] = sn * rp + cs * rq
    dev = np.abs(q @ q.T - np.eye(M)).max()
    if dev > 1e-10:
        raise ArithmeticError(f"mixing matrix lost orthogonality ({dev:.2e})")
    return q


def fit_decay_exponent(eigenvalues, lo: int = 2, hi: int | None = None) -> float:
    """Minus the least-squares slope of ``log tau_i`` on ``log i`` over ranks ``[lo, hi]``."""
    tau = np.asarray(eigenvalues, dtype=float)
    hi = tau.size // 2 if hi is None else hi
    ranks = np.arange(lo, hi + 1)
    vals = tau[ranks - 1]
    if np.any(vals <= 0):
        raise ValueError("eigenvalues must be positive over the fitted ranks")
    slope = np.polyfit(np.log(ranks), np.log(vals), 1)[0]
    return float(-slope)


def _base_spectra(spectrum: str, M: int, t: float, c: float):
    if spectrum == "brownian-cubic":
        return CUBIC_KERNEL.eigenvalues(M), BROWNIAN_COV.eigenvalues(M)
    i = np.arange(1, M + 1, dtype=float)
    return i ** (-t), i ** (-c)


def make_noncommutative_pair(M: int, t: float, c: float, mixing_seed: int | None,
                             amplitude: float = math.pi / 16, spectrum: str = "power") -> dict:
    """Kernel operator ``T`` diagonal and covariance ``C = Q diag Q^T``.

    ``mixing_seed=None`` (or ``amplitude=0``) gives ``Q = I``, the
    commuting case with ``b = t + c``.

    Returns
    -------
    dict with keys ``T``, ``C``, ``Lambda`` (SpectralOperator), ``Q`` and
    ``fitted_b``.
    """
    if M < 8:
        raise ValueError(f"M must be at least 8, got {M!r}")
    mu, xi = _base_spectra(spectrum, M, t, c)
    q = np.eye(M) if mixing_seed is None else givens_mixing(M, mixing_seed, amplitude)
    T = SpectralOperator.diagonal(mu)
    cm = (q * xi) @ q.T
    C = SpectralOperator(0.5 * (cm + cm.T))
    Lam = sandwich(T, C)
    return {"T": T, "C": C, "Lambda": Lam, "Q": q, "fitted_b": fit_decay_exponent(Lam.eigenvalues)}


@functools.lru_cache(maxsize=32)
def build_truth(scenario: Scenario) -> Truth:
    """Operators and slope for a scenario (cached; scenarios are hashable)."""
    sc = scenario
    if sc.mode == "commutative":
        mu, xi = _base_spectra(sc.spectrum, sc.M, sc.t, sc.c)
        T = SpectralOperator.diagonal(mu)
        C = SpectralOperator.diagonal(xi)
        Lam = SpectralOperator.diagonal(mu * xi)
        beta = make_slope_commutative(sc.alpha, mu, default_h(sc.M, sc.h_decay))
        b = fit_decay_exponent(mu * xi)
    else:
        pair = make_noncommutative_pair(
            sc.M, sc.t, sc.c, sc.mixing_seed, sc.mixing_amplitude, sc.spectrum
        )
        T, C, Lam, b = pair["T"], pair["C"], pair["Lambda"], pair["fitted_b"]
        beta = make_slope_noncommutative(sc.s, T, Lam, default_h(sc.M, sc.h_decay))
    beta.setflags(write=False)
    return Truth(beta_star=beta, T=T, C=C, Lambda=Lam, fitted_b=b)


def gen_dataset(scenario: Scenario, n: int, rng: np.random.Generator | None = None,
                replicate: int = 0) -> Dataset:
    """Sample ``n`` observations.

    Without ``rng`` the stream is derived from ``(scenario.seed, n, replicate)``.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n!r}")
    if rng is None:
        rng = derive_stream(scenario.seed, [n, replicate])
    truth = build_truth(scenario)
    x = sample_covariates(truth.C, n, rng)
    noise = rng.standard_normal(n)
    y = x @ truth.beta_star + scenario.sigma * noise
    return Dataset(x_coeffs=x, y=y, truth=truth, scenario=scenario)


def save_dataset(ds: Dataset, csv_path) -> list[Path]:
    """Write ``x_1..x_M, y`` as CSV and, when known, a ``.truth.json`` sidecar."""
    csv_path = Path(csv_path)
    header = ",".join([f"x_{i}" for i in range(1, ds.M + 1)] + ["y"])
    table = np.column_stack([ds.x_coeffs, ds.y])
    np.savetxt(csv_path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    written = [csv_path]
    if ds.truth is not None:
        side = truth_path(csv_path)
        payload = {"truth": ds.truth.to_dict(), "n": ds.n}
        if ds.scenario is not None:
            payload["scenario"] = ds.scenario.to_dict()
        side.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
        written.append(side)
    return written


def truth_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def load_dataset(csv_path) -> Dataset:
    """Inverse of :func:`save_dataset`; the sidecar is optional."""
    csv_path = Path(csv_path)
    with csv_path.open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if not header or header[-1] != "y" or any(not h.startswith("x_") for h in header[:-1]):
        raise ValueError(f"{csv_path}: header must be x_1,...,x_M,y")
    try:
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{csv_path}: {exc}") from None
    if table.shape[1] != len(header):
        raise ValueError(f"{csv_path}: expected {len(header)} columns, got {table.shape[1]}")
    truth = scenario = None
    side = truth_path(csv_path)
    if side.exists():
        payload = json.loads(side.read_text(encoding="utf-8"))
        truth = Truth.from_dict(payload["truth"])
        if "scenario" in payload:
            scenario = Scenario.from_dict(payload["scenario"])
    return Dataset(x_coeffs=table[:, :-1], y=table[:, -1], truth=truth, scenario=scenario)
