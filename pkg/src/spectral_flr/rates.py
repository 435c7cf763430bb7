"""Monte Carlo convergence-rate experiments.

For every sample size on a grid, independent datasets are generated, the
estimator is fitted at a regularization schedule, and the error medians are
regressed on ``n`` in log-log scale.  The fitted slope is compared with the
theoretical decay exponent.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.stats
from threadpoolctl import threadpool_limits

from .estimator import choose_lambda_theorem, fit_flr, rate_parameter
from .filters import get_filter
from .metrics import METRICS, error_triple
from .seeding import derive_stream
from .simulate import Scenario, build_truth, gen_dataset

__all__ = [
    "DEFAULT_N_GRID",
    "DEFAULT_TOLERANCES",
    "MIN_REPLICATES",
    "RateReport",
    "setting_for",
    "theoretical_exponent",
    "schedule_params",
    "fit_loglog_slope",
    "run_rate_experiment",
    "saturation_ordering",
    "thread_count",
    "write_report_json",
    "write_report_csv",
    "write_report_svg",
]

log = logging.getLogger(__name__)

DEFAULT_N_GRID = (128, 256, 512, 1024, 2048, 4096, 8192)
DEFAULT_TOLERANCES = {"l2": 0.08, "rkhs": 0.08, "pred": 0.12}
MIN_REPLICATES = 20

_SETTINGS = {
    ("commutative", "l2"): "commutative-estimation",
    ("commutative", "rkhs"): "commutative-estimation-rkhs",
    ("commutative", "pred"): "commutative-prediction",
    ("noncommutative", "rkhs"): "noncommutative-estimation",
    ("noncommutative", "pred"): "noncommutative-prediction",
}


def setting_for(mode: str, metric: str) -> str:
    """Name of the rate result covering ``metric`` in ``mode``."""
    try:
        return _SETTINGS[(mode, metric)]
    except KeyError:
        raise ValueError(f"no rate result for metric {metric!r} in {mode} mode") from None


def theoretical_exponent(setting: str, metric: str, params: dict) -> float:
    """Decay exponent ``e`` in ``error ~ n^{-e}``.

    ``setting`` is a mode (``"commutative"``, ``"noncommutative"``) or a
    full setting name.  Prediction exponents refer to the squared
    seminorm ``||C^{1/2} delta||^2``.

    Examples
    --------
    >>> round(theoretical_exponent("commutative", "l2",
    ...                            dict(t=4, c=2, alpha=0.5, nu=1)), 4)
    0.2857
    """
    if setting in ("commutative", "noncommutative"):
        setting = setting_for(setting, metric)
    elif _SETTINGS.get((setting.split("-")[0], metric)) != setting:
        raise ValueError(f"metric {metric!r} does not belong to setting {setting!r}")
    r = rate_parameter(setting, params)
    if setting.startswith("commutative"):
        t, c = float(params["t"]), float(params["c"])
        den = 1 + c + 2 * t * r
        if metric == "l2":
            return r * t / den
        if metric == "rkhs":
            return t * (r - 0.5) / den
        return (2 * r * t + c) / den
    b = float(params["b"])
    den = 1 + b + 2 * r * b
    if metric == "rkhs":
        return b * r / den
    return b * (2 * r + 1) / den


def schedule_params(scenario: Scenario, family=None, fitted_b: float | None = None) -> dict:
    """Parameter dictionary for schedules and exponents of a scenario."""
    family = get_filter(family or scenario.filter)
    params = {"nu": family.qualification}
    if scenario.mode == "commutative":
        params.update(t=scenario.t, c=scenario.c, alpha=scenario.alpha)
    else:
        b = build_truth(scenario).fitted_b if fitted_b is None else fitted_b
        params.update(b=b, s=scenario.s)
    return params


def fit_loglog_slope(points) -> tuple[float, float]:
    """OLS slope of ``log(error)`` on ``log(n)`` and its standard error.

    Parameters
    ----------
    points : iterable of (n, error)
        At least 4 points, all errors positive.
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points, got {len(pts)}")
    n, e = np.array(pts).T
    if np.any(~np.isfinite(e)) or np.any(e <= 0) or np.any(n <= 0):
        raise ValueError("sample sizes and errors must be positive and finite")
    res = scipy.stats.linregress(np.log(n), np.log(e))
    return float(res.slope), float(res.stderr)


@dataclass
class RateReport:
    setting: str
    metric: str
    filter: str
    n_grid: list
    per_n: list
    fitted_slope: float | None
    slope_stderr: float | None
    theory_exponent: float
    tolerance: float
    verdict: str
    replicates: int
    lambda_rule: str
    diagnostics: dict = field(default_factory=dict)
    errors: list = field(default_factory=list, repr=False)

    @property
    def deviation(self) -> float | None:
        if self.fitted_slope is None:
            return None
        return self.fitted_slope + self.theory_exponent

    @property
    def name(self) -> str:
        return f"{self.setting}.{self.filter}"

    def median_at(self, n: int) -> float:
        for row in self.per_n:
            if row["n"] == n:
                return row["median"]
        raise KeyError(n)

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "metric": self.metric,
            "filter": self.filter,
            "n_grid": list(self.n_grid),
            "per_n": self.per_n,
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "theory_exponent": self.theory_exponent,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "replicates": self.replicates,
            "lambda_rule": self.lambda_rule,
            "diagnostics": self.diagnostics,
        }


def thread_count() -> int:
    """Worker count from ``FLR_THREADS``, defaulting to all cores."""
    raw = os.environ.get("FLR_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"FLR_THREADS must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"FLR_THREADS must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1


def _oracle_grid(center: float, half_width: int = 6) -> list[float]:
    return [center * 2.0**k for k in range(-half_width, half_width + 1)]


def _run_cell(scenario, n, rep, lambdas, metrics, lambda_rule):
    """Fit one dataset at every schedule; returns errors per metric."""
    ds = gen_dataset(scenario, n, derive_stream(scenario.seed, [n, rep]))
    truth = ds.truth
    out, clamped = {}, {}
    cache = {}

    def triple(lam):
        if lam not in cache:
            fit = fit_flr(truth.T, ds.x_coeffs, ds.y, scenario.filter, lam, warn_on_clamp=False)
            cache[lam] = (error_triple(fit.beta_hat, truth.beta_star, truth.T, truth.C),
                          fit.diagnostics["clamped"])
        return cache[lam]

    for metric in metrics:
        lam = lambdas[metric]
        if lambda_rule == "theorem":
            err, cl = triple(lam)
            out[metric], clamped[metric] = err.get(metric), cl
        else:
            best, best_cl = math.inf, False
            for cand in _oracle_grid(lam):
                err, cl = triple(cand)
                value = err.get(metric)
                if value is not None and value < best:
                    best, best_cl = value, cl
            out[metric] = None if math.isinf(best) else best
            clamped[metric] = best_cl
    return n, rep, out, clamped


def run_rate_experiment(scenario: Scenario, n_grid=DEFAULT_N_GRID, replicates: int = 50,
                        lambda_rule: str = "theorem", metrics=None,
                        tolerances: dict | None = None, threads: int | None = None) -> dict:
    """Run the ``(n, replicate)`` grid and return one report per metric.

    Parameters
    ----------
    scenario : Scenario
    n_grid : sequence of int
        Strictly increasing, at least 4 sizes.
    replicates : int
        Datasets per size.  Below 20 the verdict is withheld.
    lambda_rule : {"theorem", "oracle"}
        ``"theorem"`` uses the rate schedule with unit constant;
        ``"oracle"`` picks, per replicate, the best of 13 values
        ``schedule * 2^k`` for ``|k| <= 6`` by the true error.
    metrics : sequence of {"l2", "rkhs", "pred"}
        Defaults to ``("l2", "pred")`` (commutative) or ``("rkhs", "pred")``.
    tolerances : dict, optional
        Slope tolerance per setting name or metric name.
    threads : int, optional
        Worker count, default from :func:`thread_count`.  Results do not
        depend on it.

    Returns
    -------
    dict
        Setting name to :class:`RateReport`.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing with at least 4 sizes")
    if replicates < 1:
        raise ValueError(f"replicates must be positive, got {replicates!r}")
    if lambda_rule not in ("theorem", "oracle"):
        raise ValueError(f"lambda_rule must be 'theorem' or 'oracle', got {lambda_rule!r}")
    if metrics is None:
        metrics = ("l2", "pred") if scenario.mode == "commutative" else ("rkhs", "pred")
    metrics = tuple(metrics)
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}")
    settings = {m: setting_for(scenario.mode, m) for m in metrics}
    family = get_filter(scenario.filter)
    truth = build_truth(scenario)
    params = schedule_params(scenario, family, truth.fitted_b)
    floor = 4 * math.sqrt(scenario.M)
    if n_grid[0] < floor:
        log.warning("smallest n=%d is below the soft floor 4*sqrt(M)=%.1f", n_grid[0], floor)

    cells = [(n, rep) for n in n_grid for rep in range(replicates)]
    lambdas = {
        n: {m: choose_lambda_theorem(settings[m], n, params) for m in metrics} for n in n_grid
    }
    workers = threads or thread_count()

    def task(cell):
        n, rep = cell
        return _run_cell(scenario, n, rep, lambdas[n], metrics, lambda_rule)

    with threadpool_limits(limits=1):
        if workers == 1:
            results = [task(c) for c in cells]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(task, cells))
    results.sort(key=lambda r: (r[0], r[1]))

    tolerances = tolerances or {}
    withheld_reason = None
    if scenario.sigma == 0:
        withheld_reason = "noiseless scenario: no variance term, slope not scored"
    elif replicates < MIN_REPLICATES:
        withheld_reason = f"underpowered: {replicates} < {MIN_REPLICATES} replicates"

    reports = {}
    for m in metrics:
        setting = settings[m]
        tol = float(tolerances.get(setting, tolerances.get(m, DEFAULT_TOLERANCES[m])))
        theory = theoretical_exponent(setting, m, params)
        per_n, rows, undefined, clamped = [], [], 0, 0
        for n in n_grid:
            vals = []
            for rn, rep, errs, cl in results:
                if rn != n:
                    continue
                clamped += bool(cl[m])
                v = errs[m]
                if v is None:
                    undefined += 1
                    continue
                vals.append(v)
                rows.append((n, rep, v))
            if vals:
                q25, med, q75 = (float(v) for v in np.percentile(vals, [25, 50, 75]))
            else:
                q25 = med = q75 = None
            per_n.append({"n": n, "median": med, "q25": q25, "q75": q75,
                          "count": len(vals), "lambda": lambdas[n][m]})
        medians = [(r["n"], r["median"]) for r in per_n]
        slope = stderr = None
        reason = withheld_reason
        if all(v is not None and v > 0 for _, v in medians):
            slope, stderr = fit_loglog_slope(medians)
        elif reason is None:
            reason = "nonpositive or undefined median error"
        if reason is not None:
            verdict = "withheld"
        else:
            verdict = "pass" if abs(slope + theory) <= tol else "fail"
        if clamped:
            log.warning("%s: %d of %d fits had lambda above lambda_max(Lambda_hat) and were clamped",
                        setting, clamped, len(results))
        diag = {"undefined_errors": undefined, "clamped_fits": clamped,
                "schedule_params": {k: _json_number(v) for k, v in params.items()},
                "rate_parameter": rate_parameter(setting, params)}
        if scenario.mode == "noncommutative":
            diag["fitted_b"] = truth.fitted_b
        if reason is not None:
            diag["withheld_reason"] = reason
        reports[setting] = RateReport(
            setting=setting, metric=m, filter=family.name, n_grid=n_grid, per_n=per_n,
            fitted_slope=slope, slope_stderr=stderr, theory_exponent=theory, tolerance=tol,
            verdict=verdict, replicates=replicates, lambda_rule=lambda_rule,
            diagnostics=diag, errors=rows,
        )
    return reports


def _json_number(v):
    v = float(v)
    return "inf" if math.isinf(v) else v


def saturation_ordering(reports: dict, n: int | None = None,
                        smoother: str = "cutoff", rougher: str = "tikhonov") -> dict:
    """Compare median L2 errors of two filters at the largest common ``n``.

    ``reports`` maps filter name to an L2 :class:`RateReport`.  The
    ordering holds when the higher-qualification filter (``smoother``) is
    no worse than the saturating one.
    """
    a, b = reports[smoother], reports[rougher]
    if n is None:
        n = max(set(a.n_grid) & set(b.n_grid))
    ea, eb = a.median_at(n), b.median_at(n)
    return {"n": n, "median_l2": {smoother: ea, rougher: eb}, "ordered": bool(ea <= eb)}


def write_report_json(report: RateReport, path) -> None:
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def write_report_csv(report: RateReport, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", "metric", "n", "replicate", "error"])
    for n, rep, err in report.errors:
        w.writerow([report.setting, report.metric, n, rep, repr(float(err))])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_report_svg(report: RateReport, path) -> None:
    """Log-log plot of the medians with the fitted and theory-slope lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in report.per_n if r["median"] is not None]
    n = np.array([r["n"] for r in rows], dtype=float)
    med = np.array([r["median"] for r in rows])
    lo = np.array([r["q25"] for r in rows])
    hi = np.array([r["q75"] for r in rows])
    with matplotlib.rc_context({"svg.hashsalt": "spectral-flr", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.errorbar(n, med, yerr=[med - lo, hi - med], fmt="o", color="k",
                    capsize=3, label="median (IQR)")
        if report.fitted_slope is not None and len(n):
            logn = np.log(n)
            anchor = np.exp(np.mean(np.log(med)) - report.fitted_slope * np.mean(logn))
            ax.plot(n, anchor * n**report.fitted_slope, "-", color="C0",
                    label=f"fit slope {report.fitted_slope:.3f}")
            ref = np.exp(np.mean(np.log(med)) + report.theory_exponent * np.mean(logn))
            ax.plot(n, ref * n ** (-report.theory_exponent), "--", color="C3",
                    label=f"theory slope {-report.theory_exponent:.3f}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(f"{report.metric} error")
        ax.set_title(f"{report.setting} ({report.filter}): {report.verdict}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
