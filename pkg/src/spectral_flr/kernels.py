"""Analytic kernels on ``[0, 1]``, their eigensystems, and grid discretization.

The Brownian-motion covariance ``min(s, t)`` and the cubic kernel

    K(s, t) = |s - t|^3 / 12 - (s + t)^3 / 12 + s t

share the eigenfunctions ``phi_i(s) = sqrt(2) sin((i - 1/2) pi s)`` with
eigenvalues ``((i - 1/2) pi)^{-2}`` and ``((i - 1/2) pi)^{-4}``.  That makes
them a commuting covariance/kernel pair with decay exponents ``c = 2`` and
``t = 4``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .operators import SpectralOperator

__all__ = [
    "EigensystemKind",
    "AnalyticEigensystem",
    "BROWNIAN_COV",
    "CUBIC_KERNEL",
    "synthetic_power",
    "eval_cubic_kernel",
    "eval_brownian_cov",
    "analytic_eigenvalue",
    "sine_eigenfunction",
    "QuadratureGrid",
    "uniform_grid",
    "trapezoid_grid",
    "gauss_legendre_grid",
    "nystrom_discretize",
    "CurveParseError",
    "read_curves",
    "ingest_curves",
]


def _check_unit_interval(*values):
    for v in values:
        a = np.asarray(v, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError(f"arguments must lie in [0, 1], got {v!r}")


def eval_cubic_kernel(s, t):
    """``|s - t|^3/12 - (s + t)^3/12 + s t`` for ``s, t`` in ``[0, 1]``."""
    _check_unit_interval(s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.abs(s - t) ** 3 / 12.0 - (s + t) ** 3 / 12.0 + s * t
    return float(out) if out.ndim == 0 else out


def eval_brownian_cov(s, t):
    """Brownian-motion covariance ``min(s, t)`` on ``[0, 1]``."""
    _check_unit_interval(s, t)
    out = np.minimum(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    return float(out) if out.ndim == 0 else out


def sine_eigenfunction(i, s):
    """``sqrt(2) sin((i - 1/2) pi s)``; broadcasts over ``i`` and ``s``."""
    i = np.asarray(i, dtype=float)
    s = np.asarray(s, dtype=float)
    return math.sqrt(2.0) * np.sin((i - 0.5) * math.pi * s)


class EigensystemKind(str, enum.Enum):
    BROWNIAN_COV = "brownian"
    CUBIC_KERNEL = "cubic"
    SYNTHETIC_POWER = "power"


@dataclass(frozen=True)
class AnalyticEigensystem:
    """Closed-form eigenpairs on ``[0, 1]``.

    Parameters
    ----------
    kind : EigensystemKind
    decay_exponent : float
        ``2`` for the Brownian covariance, ``4`` for the cubic kernel, and the
        user-set ``q`` in ``i^{-q}`` for synthetic power decay.  Synthetic
        systems borrow the sine eigenfunctions.
    """

    kind: EigensystemKind
    decay_exponent: float

    def eigenvalue(self, i):
        """Eigenvalue(s) for 1-based index ``i``."""
        return analytic_eigenvalue(self, i)

    def eigenvalues(self, m: int) -> np.ndarray:
        return np.asarray(analytic_eigenvalue(self, np.arange(1, m + 1)), dtype=float)

    def eigenfunction(self, i, s):
        return sine_eigenfunction(i, s)

    def design(self, points, m: int) -> np.ndarray:
        """``Phi[g, i] = phi_{i+1}(points[g])``, shape ``(len(points), m)``."""
        pts = np.asarray(points, dtype=float)
        return sine_eigenfunction(np.arange(1, m + 1)[None, :], pts[:, None])

    def operator(self, m: int) -> SpectralOperator:
        """Diagonal operator of the first ``m`` eigenvalues."""
        return SpectralOperator.diagonal(self.eigenvalues(m))


BROWNIAN_COV = AnalyticEigensystem(EigensystemKind.BROWNIAN_COV, 2.0)
CUBIC_KERNEL = AnalyticEigensystem(EigensystemKind.CUBIC_KERNEL, 4.0)


def synthetic_power(q: float) -> AnalyticEigensystem:
    if not q > 0:
        raise ValueError(f"decay exponent must be positive, got {q!r}")
    return AnalyticEigensystem(EigensystemKind.SYNTHETIC_POWER, float(q))


def analytic_eigenvalue(kind, i):
    """Eigenvalue number ``i`` (1-based) of an analytic system.

    ``kind`` is an :class:`AnalyticEigensystem` or one of the names
    ``"brownian"``, ``"cubic"``.
    """
    if not isinstance(kind, AnalyticEigensystem):
        kind = {"brownian": BROWNIAN_COV, "cubic": CUBIC_KERNEL}[str(kind)]
    idx = np.asarray(i)
    if np.any(idx < 1):
        raise ValueError(f"eigenvalue index must be >= 1, got {i!r}")
    idx = idx.astype(float)
    if kind.kind is EigensystemKind.SYNTHETIC_POWER:
        out = idx ** (-kind.decay_exponent)
    else:
        out = ((idx - 0.5) * math.pi) ** (-kind.decay_exponent)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QuadratureGrid:
    """Quadrature nodes and positive weights on ``[0, 1]``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if p.ndim != 1 or p.shape != w.shape or p.size < 1:
            raise ValueError("points and weights must be 1-d arrays of equal length")
        if np.any(np.diff(p) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        _check_unit_interval(p)
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.size

    def integrate(self, values) -> np.ndarray:
        """Quadrature along the last axis of ``values``."""
        return np.asarray(values, dtype=float) @ self.weights


def uniform_grid(size: int = 256) -> QuadratureGrid:
    """Equispaced points including both endpoints, trapezoid weights."""
    if size < 2:
        raise ValueError("a trapezoid grid needs at least 2 points")
    pts = np.linspace(0.0, 1.0, size)
    w = np.full(size, 1.0 / (size - 1))
    w[[0, -1]] *= 0.5
    return QuadratureGrid(pts, w)


def trapezoid_grid(points) -> QuadratureGrid:
    """Trapezoid weights on arbitrary increasing nodes spanning ``[0, 1]``.

    The first and last node must be 0 and 1 so the weights sum to 1.
    """
    p = np.asarray(points, dtype=float)
    if p.size < 2 or p[0] != 0.0 or p[-1] != 1.0:
        raise ValueError("trapezoid nodes must start at 0 and end at 1")
    gaps = np.diff(p)
    w = np.zeros_like(p)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return QuadratureGrid(p, w)


def gauss_legendre_grid(size: int) -> QuadratureGrid:
    x, w = np.polynomial.legendre.leggauss(size)
    return QuadratureGrid(0.5 * (x + 1.0), 0.5 * w)


def nystrom_discretize(kernel, grid: QuadratureGrid, symmetry_tol: float = 1e-10) -> SpectralOperator:
    """Symmetric Nystrom matrix ``W^{1/2} K W^{1/2}`` on a quadrature grid.

    ``kernel`` is a vectorized function of ``(s, t)``.  Its eigenvalues
    approximate those of the integral operator; eigenvectors divided by
    ``sqrt(w)`` approximate eigenfunction values at the nodes.
    """
    p = grid.points
    k = np.asarray(kernel(p[:, None], p[None, :]), dtype=float)
    k = np.broadcast_to(k, (p.size, p.size))
    scale = max(np.abs(k).max(), np.finfo(float).tiny)
    if np.abs(k - k.T).max() > symmetry_tol * scale:
        raise ValueError("kernel is not symmetric on the grid")
    root = np.sqrt(grid.weights)
    b = root[:, None] * k * root[None, :]
    return SpectralOperator(0.5 * (b + b.T))


class CurveParseError(ValueError):
    """Malformed curve CSV; ``row`` is the 1-based line number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(where + message)


def _parse_floats(cells, row):
    out = []
    for cell in cells:
        try:
            out.append(float(cell))
        except ValueError:
            raise CurveParseError(f"non-numeric cell {cell.strip()!r}", row) from None
    arr = np.asarray(out)
    if not np.all(np.isfinite(arr)):
        raise CurveParseError("non-finite value", row)
    return arr


def read_curves(csv_path) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Read a curve CSV into ``(grid_points, curve_ids, values)``.

    The first row is ``s, s_1, ..., s_G``; every following row is
    ``curve_id, x(s_1), ..., x(s_G)``.
    """
    path = Path(csv_path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [(k + 1, r) for k, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise CurveParseError("empty curve file")
    head_row, header = rows[0]
    if len(header) < 2:
        raise CurveParseError("header needs a label and at least one grid point", head_row)
    points = _parse_floats(header[1:], head_row)
    ids, values = [], []
    for line, r in rows[1:]:
        if len(r) != len(header):
            raise CurveParseError(
                f"expected {len(header)} cells, found {len(r)}", line
            )
        ids.append(r[0].strip())
        values.append(_parse_floats(r[1:], line))
    vals = np.vstack(values) if values else np.empty((0, points.size))
    return points, ids, vals


def ingest_curves(csv_path, grid: QuadratureGrid, m: int, system: AnalyticEigensystem = BROWNIAN_COV):
    """Project sampled curves onto the first ``m`` sine eigenfunctions.

    Parameters
    ----------
    csv_path : path-like
        Curve file, see :func:`read_curves`.
    grid : QuadratureGrid
        Quadrature rule whose nodes must equal the header grid points.
    m : int
        Number of coefficients per curve.

    Returns
    -------
    coeffs : ndarray, shape (n, m)
        ``coeffs[k, i] = sum_g w_g x_k(s_g) phi_{i+1}(s_g)``.
    ids : list of str
    """
    points, ids, values = read_curves(csv_path)
    if points.shape != grid.points.shape or not np.allclose(
        points, grid.points, rtol=0.0, atol=1e-9
    ):
        raise CurveParseError(
            f"header grid ({points.size} points) does not match the quadrature grid", 1
        )
    phi = system.design(grid.points, m)
    coeffs = (values * grid.weights) @ phi
    return coeffs, ids
