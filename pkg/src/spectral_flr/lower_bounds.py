"""Hypothesis families behind the minimax lower bounds.

Binary codewords ``theta`` with large pairwise Hamming distance index slope
functions supported on the coordinates ``M+1, ..., 2M``.  The module
computes their pairwise separations and the Kullback-Leibler divergences of
the induced Gaussian regression models.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .metrics import l2_error, prediction_error, rkhs_error
from .operators import SpectralOperator

__all__ = [
    "Codebook",
    "CodebookSearchError",
    "HypothesisFamily",
    "varshamov_gilbert",
    "verify_codebook",
    "hypothesis_slope",
    "build_family",
    "kl_divergence",
    "kl_monte_carlo",
    "separation_report",
    "choose_m",
]


class CodebookSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class Codebook:
    """Binary words, the first of which is all zeros.

    ``N`` is the number of nonzero words.
    """

    M: int
    words: np.ndarray

    @property
    def N(self) -> int:
        return self.words.shape[0] - 1

    def min_distance(self) -> int:
        return int(min(
            np.count_nonzero(a != b) for a, b in itertools.combinations(self.words, 2)
        ))

    def to_dict(self) -> dict:
        return {"M": self.M, "words": ["".join(map(str, w)) for w in self.words.tolist()]}


def verify_codebook(book: Codebook) -> bool:
    """Exhaustive check: zero word first, every pair at distance ``> M/8``."""
    w = book.words
    if w.ndim != 2 or w.shape[1] != book.M or np.any((w != 0) & (w != 1)):
        return False
    if np.any(w[0] != 0):
        return False
    for a, b in itertools.combinations(range(w.shape[0]), 2):
        if 8 * np.count_nonzero(w[a] != w[b]) <= book.M:
            return False
    return True


def varshamov_gilbert(M: int, rng: np.random.Generator, budget: int = 10_000,
                      target: int | None = None) -> Codebook:
    """Randomized greedy codebook with pairwise Hamming distance ``> M/8``.

    Uniform random words are accepted when they are far from every accepted
    word; each new word gets ``budget`` candidates.  The search stops once
    ``ceil(2^{M/8})`` nonzero words are found (or ``target``).

    Raises
    ------
    CodebookSearchError
        If a word cannot be found within the budget.
    """
    if M < 8:
        raise ValueError(f"M must be at least 8, got {M!r}")
    need = math.ceil(2 ** (M / 8)) if target is None else int(target)
    words = np.zeros((1, M), dtype=np.int8)
    while words.shape[0] - 1 < need:
        for _ in range(budget):
            cand = rng.integers(0, 2, size=M, dtype=np.int8)
            dist = np.count_nonzero(words != cand, axis=1)
            if np.all(8 * dist > M):
                words = np.vstack([words, cand])
                break
        else:
            raise CodebookSearchError(
                f"no admissible word among {budget} candidates after {words.shape[0] - 1} words"
            )
    book = Codebook(M, words)
    if not verify_codebook(book):
        raise AssertionError("codebook failed exhaustive verification")
    return book


def _diagonal(op: SpectralOperator, name: str) -> np.ndarray:
    m = op.matrix
    off = m - np.diag(np.diag(m))
    if np.abs(off).max(initial=0.0) > 1e-14 * max(np.abs(m).max(), 1e-300):
        raise ValueError(f"{name} must be diagonal in the construction basis")
    return np.diag(m).copy()


def hypothesis_slope(theta, M: int, smoothness: float, T: SpectralOperator,
                     C: SpectralOperator | None = None, mode: str = "commutative") -> np.ndarray:
    """Coefficients of ``f_theta``.

    Commutative: coordinate ``k + M`` (1-based) equals
    ``theta_k M^{-1/2} mu_{k+M}^alpha``.  Non-commutative:
    ``theta_k M^{-1/2} mu_{k+M}^{1/2} tau_{k+M}^s`` with ``tau = mu xi``.
    Operators must be diagonal with dimension at least ``2M``.
    """
    theta = np.asarray(theta)
    if theta.shape != (M,):
        raise ValueError(f"theta must have length {M}")
    mu = _diagonal(T, "T")
    if mu.size < 2 * M:
        raise ValueError(f"operators need dimension >= 2M = {2 * M}, got {mu.size}")
    block = mu[M:2 * M]
    if mode == "commutative":
        scale = block**smoothness
    elif mode == "noncommutative":
        if C is None:
            raise ValueError("the non-commutative family needs C")
        xi = _diagonal(C, "C")[M:2 * M]
        scale = np.sqrt(block) * (block * xi) ** smoothness
    else:
        raise ValueError(f"unknown mode {mode!r}")
    f = np.zeros(mu.size)
    f[M:2 * M] = theta * scale / math.sqrt(M)
    return f


@dataclass(frozen=True)
class HypothesisFamily:
    codebook: Codebook
    slopes: np.ndarray
    smoothness: float
    mode: str

    @property
    def basis_offset(self) -> int:
        return self.codebook.M


def build_family(book: Codebook, smoothness: float, T, C=None, mode="commutative") -> HypothesisFamily:
    slopes = np.vstack([hypothesis_slope(w, book.M, smoothness, T, C, mode) for w in book.words])
    return HypothesisFamily(book, slopes, float(smoothness), mode)


def kl_divergence(f1, f2, n: int, sigma2: float, C: SpectralOperator) -> float:
    """``n / (2 sigma^2) (f1 - f2)^T C (f1 - f2)``.

    KL divergence between the ``n``-sample laws of Gaussian regression
    models with slopes ``f1`` and ``f2`` and common covariate law.
    """
    if not sigma2 > 0:
        raise ValueError(f"noise variance must be positive, got {sigma2!r}")
    d = np.asarray(f1, dtype=float) - np.asarray(f2, dtype=float)
    return n / (2.0 * sigma2) * prediction_error(d, C)


def kl_monte_carlo(f1, f2, n: int, sigma2: float, C: SpectralOperator,
                   rng: np.random.Generator, datasets: int = 100_000) -> float:
    """Direct estimate of ``E_{P_1} log(dP_1/dP_2)`` over simulated datasets.

    The covariate densities cancel, so each dataset contributes the sum of
    per-observation Gaussian log-likelihood ratios of the responses.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    sd = math.sqrt(sigma2)
    root = np.sqrt(C.eigenvalues)
    total = 0.0
    chunk = max(1, 200_000 // max(n, 1))
    done = 0
    while done < datasets:
        k = min(chunk, datasets - done)
        z = rng.standard_normal((k * n, C.dim))
        x = (z * root) @ C.eigenvectors.T
        m1, m2 = x @ f1, x @ f2
        y = m1 + sd * rng.standard_normal(k * n)
        llr = ((y - m2) ** 2 - (y - m1) ** 2) / (2.0 * sigma2)
        total += float(llr.sum())
        done += k
    return total / datasets


def choose_m(n: int, c0: float, q: float) -> int:
    """Smallest integer strictly greater than ``c0 n^{1/q}``."""
    return math.floor(c0 * n ** (1.0 / q)) + 1


def separation_report(family: HypothesisFamily, T: SpectralOperator, C: SpectralOperator,
                      n: int, sigma2: float = 1.0, u: float | None = None) -> dict:
    """Pairwise separations, KL divergences, and the KL budget check.

    Returns
    -------
    dict
        ``min_distance`` for ``"l2"``, ``"rkhs"`` and ``"pred"`` (the
        prediction seminorm, not squared), ``max_pairwise_kl``, the KL of
        every word against the zero word, and, when ``u`` is given,
        ``budget`` with ``mean_kl <= u log N``.
    """
    book = family.codebook
    f = family.slopes
    k = f.shape[0]
    mins = {"l2": math.inf, "rkhs": math.inf, "pred": math.inf}
    rkhs_defined = True
    max_kl = 0.0
    for a, b in itertools.combinations(range(k), 2):
        d = f[a] - f[b]
        mins["l2"] = min(mins["l2"], l2_error(d))
        r = rkhs_error(d, T)
        if r is None:
            rkhs_defined = False
        else:
            mins["rkhs"] = min(mins["rkhs"], r)
        mins["pred"] = min(mins["pred"], math.sqrt(prediction_error(d, C)))
        max_kl = max(max_kl, kl_divergence(f[a], f[b], n, sigma2, C))
    kl0 = [kl_divergence(f[j], f[0], n, sigma2, C) for j in range(1, k)]
    out = {
        "M": book.M,
        "N": book.N,
        "n": int(n),
        "sigma2": float(sigma2),
        "mode": family.mode,
        "smoothness": family.smoothness,
        "codebook_verified": verify_codebook(book),
        "min_hamming": book.min_distance(),
        "min_distance": {key: (None if (key == "rkhs" and not rkhs_defined) else val)
                         for key, val in mins.items()},
        "max_pairwise_kl": max_kl,
        "kl_to_zero": kl0,
    }
    if u is not None:
        if not 0 < u < 0.125:
            raise ValueError(f"u must lie in (0, 1/8), got {u!r}")
        mean_kl = float(np.mean(kl0))
        bound = u * math.log(book.N)
        out["budget"] = {"u": u, "mean_kl": mean_kl, "bound": bound, "holds": mean_kl <= bound}
    return out


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
