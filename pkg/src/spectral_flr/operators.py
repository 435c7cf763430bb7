"""Dense symmetric PSD operators in a truncated orthonormal basis.

Operators are immutable values; the eigendecomposition is computed once at
construction.  All functions return new operators.
"""
from __future__ import annotations

import json

import numpy as np
import scipy.linalg

from .filters import eval_filter, get_filter

__all__ = [
    "SpectralOperator",
    "NotPSDError",
    "frac_power",
    "apply_filter",
    "sandwich",
    "effective_dimension",
    "verify_jt_identity",
]

SYMMETRY_RTOL = 1e-12
CLAMP_RTOL = 1e-12


class NotPSDError(ValueError):
    pass


class SpectralOperator:
    """A symmetric positive semidefinite matrix with cached eigensystem.

    Parameters
    ----------
    matrix : array_like, shape (M, M)
        Coefficients in a fixed orthonormal L2 basis.  Asymmetry beyond
        ``1e-12 * max|matrix|`` is rejected; smaller asymmetry is averaged out.

    Attributes
    ----------
    eigenvalues : ndarray
        Descending; roundoff negatives above ``-1e-12 * lambda_max`` clamped to 0.
    eigenvectors : ndarray
        Orthogonal, columns ordered like ``eigenvalues``.
    """

    __slots__ = ("_matrix", "_eigenvalues", "_eigenvectors")

    def __init__(self, matrix):
        a = np.array(matrix, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator matrix has non-finite entries")
        scale = np.abs(a).max() if a.size else 0.0
        if np.abs(a - a.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
            raise ValueError("operator matrix is not symmetric")
        a = 0.5 * (a + a.T)
        w, u = np.linalg.eigh(a)
        w, u = w[::-1], u[:, ::-1]
        top = max(w[0], 0.0) if w.size else 0.0
        if w.size and w[-1] < -CLAMP_RTOL * max(top, scale):
            raise NotPSDError(f"operator has eigenvalue {w[-1]:.3e} < 0")
        w = np.maximum(w, 0.0)
        parts = [np.ascontiguousarray(x) for x in (a, w, u)]
        for x in parts:
            x.setflags(write=False)
        self._matrix, self._eigenvalues, self._eigenvectors = parts

    @classmethod
    def diagonal(cls, values) -> "SpectralOperator":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def from_eigensystem(cls, eigenvalues, eigenvectors) -> "SpectralOperator":
        u = np.asarray(eigenvectors, dtype=float)
        return cls((u * np.asarray(eigenvalues, dtype=float)) @ u.T)

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eigenvectors

    @property
    def max_eigenvalue(self) -> float:
        return float(self._eigenvalues[0]) if self.dim else 0.0

    def spectral_map(self, values) -> "SpectralOperator":
        """``U diag(values) U^T`` with this operator's eigenvectors.

        The eigensystem of the result is known, so it is reused rather than
        recomputed when ``values`` are nonnegative.
        """
        vals = np.asarray(values, dtype=float)
        u = self._eigenvectors
        b = (u * vals) @ u.T
        b = 0.5 * (b + b.T)
        if vals.size and (vals.min() < 0 or not np.all(np.isfinite(vals))):
            return SpectralOperator(b)
        order = np.argsort(-vals, kind="stable")
        return SpectralOperator._from_parts(b, vals[order], u[:, order])

    @classmethod
    def _from_parts(cls, matrix, eigenvalues, eigenvectors) -> "SpectralOperator":
        obj = cls.__new__(cls)
        parts = [np.ascontiguousarray(a, dtype=float) for a in (matrix, eigenvalues, eigenvectors)]
        for a in parts:
            a.setflags(write=False)
        obj._matrix, obj._eigenvalues, obj._eigenvectors = parts
        return obj

    def apply(self, v) -> np.ndarray:
        return self._matrix @ np.asarray(v, dtype=float)

    def __matmul__(self, other):
        if isinstance(other, SpectralOperator):
            return self._matrix @ other._matrix
        return self._matrix @ other

    def __repr__(self) -> str:
        return f"SpectralOperator(dim={self.dim}, max_eig={self.max_eigenvalue:.4g})"

    def to_json(self) -> dict:
        return {"dim": self.dim, "matrix": self._matrix.ravel().tolist()}

    @classmethod
    def from_json(cls, obj) -> "SpectralOperator":
        if isinstance(obj, str):
            obj = json.loads(obj)
        dim = int(obj["dim"])
        entries = np.asarray(obj["matrix"], dtype=float)
        if entries.size != dim * dim:
            raise ValueError(f"expected {dim * dim} matrix entries, got {entries.size}")
        return cls(entries.reshape(dim, dim))


def _as_operator(a) -> SpectralOperator:
    return a if isinstance(a, SpectralOperator) else SpectralOperator(a)


def frac_power(a, p: float) -> SpectralOperator:
    """``A^p`` through the eigensystem, with ``0^0 = 1``."""
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p!r}")
    a = _as_operator(a)
    w = a.eigenvalues
    if p == 0:
        vals = np.ones_like(w)
    else:
        vals = np.where(w > 0, w, 0.0) ** p
    return a.spectral_map(vals)


def apply_filter(family, lam: float, a, eta: float | None = None) -> SpectralOperator:
    """``g_lam(A)`` through the eigensystem of ``A``.

    ``eta`` defaults to the largest eigenvalue of ``A``, raised to ``lam``
    when the spectrum lies entirely below ``lam`` (e.g. ``A = 0``).
    """
    a = _as_operator(a)
    if eta is None:
        eta = max(a.max_eigenvalue, lam)
    g = eval_filter(get_filter(family), lam, np.minimum(a.eigenvalues, eta), eta)
    return a.spectral_map(g)


def sandwich(t, c) -> SpectralOperator:
    """``T^{1/2} C T^{1/2}``, symmetrized against roundoff."""
    t = _as_operator(t)
    c = _as_operator(c)
    if t.dim != c.dim:
        raise ValueError(f"dimension mismatch: {t.dim} vs {c.dim}")
    root = frac_power(t, 0.5).matrix
    b = root @ c.matrix @ root
    return SpectralOperator(0.5 * (b + b.T))


def effective_dimension(lam_op, lam: float) -> float:
    """``trace(L (L + lam I)^{-1})``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    tau = _as_operator(lam_op).eigenvalues
    return float(np.sum(tau / (tau + lam)))


def verify_jt_identity(a, t, family, lam: float, eta: float | None = None) -> float:
    """Relative Frobenius gap between the two sides of the inclusion identity.

    Left: ``T^{1/2} g(T^{1/2} A T^{1/2}) T^{1/2}``, built from fractional
    powers.  Right: ``J g(J* A J) J*`` built from the eigensystem of
    ``J* A J`` on the RKHS, with ``<f, g>_H = f^T T^+ g`` on ``range(T)``.
    Representing ``f = T c`` the RKHS eigenproblem is the pencil
    ``(T A T) c = m T c``; with ``c^T T c = 1`` and ``phi = T c`` the right
    side is ``sum_i g(m_i) phi_i phi_i^T``.  Null modes of ``A`` carry
    ``g(0)`` and need no separate normalization since the pencil is solved
    with the ``T``-inner product.
    """
    a = _as_operator(a)
    t = _as_operator(t)
    family = get_filter(family)

    lam_op = sandwich(t, a)
    if eta is None:
        eta = max(lam_op.max_eigenvalue, lam)
    root = frac_power(t, 0.5).matrix
    left = root @ apply_filter(family, lam, lam_op, eta).matrix @ root

    mu, v = t.eigenvalues, t.eigenvectors
    keep = mu > CLAMP_RTOL * max(t.max_eigenvalue, np.finfo(float).tiny)
    vr, mr = v[:, keep], mu[keep]
    pencil = (vr.T @ a.matrix @ vr) * mr[:, None] * mr[None, :]
    pencil = 0.5 * (pencil + pencil.T)
    m, d = scipy.linalg.eigh(pencil, np.diag(mr))
    m = np.clip(m, 0.0, eta)
    phi = vr @ (mr[:, None] * d)
    right = (phi * eval_filter(family, lam, m, eta)) @ phi.T

    ref = np.linalg.norm(left)
    gap = np.linalg.norm(left - right)
    return float(gap / ref) if ref > 0 else float(gap)
