"""Command-line interface: ``flr <command> [--config PATH] [--preset NAME] ...``.

Exit codes: 0 all checks pass, 1 configuration or input error, 2 a
scientific check failed, 3 verdict withheld (underpowered or noiseless).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import kernels, lower_bounds, rates
from .config import ConfigError, RunManifest, canonical_json, load_config, preset_names
from .estimator import choose_lambda_theorem, fit_flr
from .filters import certify_constants
from .kernels import CurveParseError
from .metrics import error_triple
from .seeding import derive_stream
from .simulate import build_truth, gen_dataset, load_dataset, save_dataset

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_WITHHELD = 0, 1, 2, 3

log = logging.getLogger("spectral_flr")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class _Run:
    """Collects outputs of one command and writes its manifest last."""

    def __init__(self, cfg, command: str, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        seed = cfg.data["lowerbound"]["seed"] if command == "lowerbound" else cfg.data["scenario"]["seed"]
        self.manifest = RunManifest(cfg.hash, int(seed), _version(), command)

    def path(self, name: str) -> Path:
        self.manifest.outputs.append(name)
        return self.out / name

    def write_json(self, name: str, payload) -> Path:
        p = self.path(name)
        p.write_text(canonical_json(payload), encoding="utf-8")
        return p

    def finish(self, code: int) -> int:
        self.write_json("config.json", self.cfg.data)
        self.manifest.finish(code)
        (self.out / "manifest.json").write_text(canonical_json(self.manifest.to_dict()), encoding="utf-8")
        return code


def cmd_filters_check(cfg, out: Path) -> int:
    run = _Run(cfg, "filters-check", out)
    fc = cfg.section("filters_check")
    report, failures = {}, []
    for fam in fc["families"]:
        p_list = fc["p_list"].get(fam, [1])
        cert = certify_constants(fam, eta=fc["eta"], p_list=p_list, grid_size=fc["grid_size"])
        report[fam] = cert.to_dict()
        failures += cert.failures()
    report["certified"] = not failures
    report["failures"] = failures
    run.write_json("filters_check.json", report)
    for fam in fc["families"]:
        c = report[fam]
        omegas = ", ".join(f"omega_{float(p):g}={v:.4g}" for p, v in c["omega"].items())
        print(f"{fam:10s} A={c['A']:.6g} B={c['B']:.6g} D={c['D']:.6g} {omegas}")
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    return run.finish(EXIT_OK if not failures else EXIT_CHECK)


def cmd_rates(cfg, out: Path) -> int:
    run = _Run(cfg, "rates", out)
    hv = cfg.harness
    scenario = cfg.scenario
    families = hv["compare_filters"] or [scenario.filter]
    verdicts, l2_reports = [], {}
    for fam in families:
        sc = scenario.replace(filter=fam)
        reports = rates.run_rate_experiment(
            sc, hv["n_grid"], hv["replicates"], hv["lambda_rule"], hv["metrics"],
            tolerances=hv["tolerances"],
        )
        for setting, rep in reports.items():
            stem = f"{setting}.{fam}"
            rates.write_report_json(rep, run.path(f"{stem}.json"))
            rates.write_report_csv(rep, run.path(f"{stem}.csv"))
            if cfg.data["output"]["svg"]:
                rates.write_report_svg(rep, run.path(f"{stem}.svg"))
            dev = "n/a" if rep.deviation is None else f"{rep.deviation:+.3f}"
            slope = "n/a" if rep.fitted_slope is None else f"{rep.fitted_slope:.4f}"
            print(f"{stem}: slope {slope} theory {-rep.theory_exponent:.4f} "
                  f"deviation {dev} tol {rep.tolerance:.2f} -> {rep.verdict}")
            if hv["score_slopes"]:
                verdicts.append(rep.verdict)
            if rep.metric == "l2":
                l2_reports[fam] = rep
    if len(families) > 1 and len(l2_reports) == len(families):
        smooth = max(families, key=lambda f: l2_reports[f].diagnostics["rate_parameter"])
        rough = min(families, key=lambda f: l2_reports[f].diagnostics["rate_parameter"])
        if smooth != rough:
            order = rates.saturation_ordering(l2_reports, smoother=smooth, rougher=rough)
            run.write_json("saturation.json", order)
            print(f"saturation at n={order['n']}: median L2 {smooth}={order['median_l2'][smooth]:.4g} "
                  f"{rough}={order['median_l2'][rough]:.4g} -> {'pass' if order['ordered'] else 'fail'}")
            verdicts.append("pass" if order["ordered"] else "fail")
    if "fail" in verdicts:
        code = EXIT_CHECK
    elif "withheld" in verdicts:
        print("verdict withheld (underpowered or noiseless run)", file=sys.stderr)
        code = EXIT_WITHHELD
    else:
        code = EXIT_OK
    return run.finish(code)


def _lowerbound_operators(lb: dict):
    m2 = 2 * lb["M"]
    if lb["spectrum"] == "brownian-cubic":
        mu = kernels.CUBIC_KERNEL.eigenvalues(m2)
        xi = kernels.BROWNIAN_COV.eigenvalues(m2)
    else:
        i = np.arange(1, m2 + 1, dtype=float)
        mu, xi = i ** -lb["t"], i ** -lb["c"]
    from .operators import SpectralOperator

    return SpectralOperator.diagonal(mu), SpectralOperator.diagonal(xi)


def cmd_lowerbound(cfg, out: Path) -> int:
    run = _Run(cfg, "lowerbound", out)
    lb = cfg.lowerbound
    book = lower_bounds.varshamov_gilbert(lb["M"], derive_stream(lb["seed"], [0]))
    T, C = _lowerbound_operators(lb)
    fam = lower_bounds.build_family(book, lb["smoothness"], T, C, lb["mode"])
    report = lower_bounds.separation_report(fam, T, C, lb["n"], lb["sigma2"], lb["u"])
    report["codebook"] = book.to_dict()
    run.write_json("separation_report.json", report)
    ok = report["codebook_verified"] and report["budget"]["holds"]
    print(f"M={book.M} N={book.N} min Hamming={report['min_hamming']} "
          f"verified={report['codebook_verified']} mean KL={report['budget']['mean_kl']:.4g} "
          f"<= u log N={report['budget']['bound']:.4g}: {report['budget']['holds']}")
    return run.finish(EXIT_OK if ok else EXIT_CHECK)


def cmd_simulate(cfg, out: Path) -> int:
    run = _Run(cfg, "simulate", out)
    sim = cfg.section("simulate")
    ds = gen_dataset(cfg.scenario, sim["n"], replicate=sim["replicate"])
    for p in save_dataset(ds, run.out / "dataset.csv"):
        run.manifest.outputs.append(p.name)
    print(f"wrote {ds.n} x {ds.M} dataset to {run.out / 'dataset.csv'}")
    return run.finish(EXIT_OK)


def _read_responses(path: Path) -> dict:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    out = {}
    for line, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != 2:
            raise CurveParseError(f"{path}: expected 'curve_id,y', found {len(row)} cells", line)
        try:
            out[row[0].strip()] = float(row[1])
        except ValueError:
            raise CurveParseError(f"{path}: non-numeric response {row[1]!r}", line) from None
    return out


def cmd_fit(cfg, out: Path) -> int:
    run = _Run(cfg, "fit", out)
    fit_cfg = cfg.section("fit")
    scenario = cfg.scenario
    truth = None
    if "dataset" in fit_cfg:
        ds = load_dataset(fit_cfg["dataset"])
        x, y, truth = ds.x_coeffs, ds.y, ds.truth
        T = truth.T if truth is not None else build_truth(scenario.replace(M=ds.M)).T
    elif "curves" in fit_cfg and "responses" in fit_cfg:
        points, _, _ = kernels.read_curves(fit_cfg["curves"])
        grid = kernels.trapezoid_grid(points)
        x, ids = kernels.ingest_curves(fit_cfg["curves"], grid, scenario.M)
        resp = _read_responses(Path(fit_cfg["responses"]))
        missing = [i for i in ids if i not in resp]
        if missing:
            raise CurveParseError(f"no response for curves {missing[:5]}")
        y = np.array([resp[i] for i in ids])
        T = build_truth(scenario).T
    else:
        raise ConfigError(["fit: give either fit.dataset or both fit.curves and fit.responses"])
    n = x.shape[0]
    if "lambda" in fit_cfg:
        lam = fit_cfg["lambda"]
    else:
        params = rates.schedule_params(scenario, fitted_b=truth.fitted_b if truth else None)
        setting = rates.setting_for(scenario.mode, "l2" if scenario.mode == "commutative" else "rkhs")
        lam = choose_lambda_theorem(setting, n, params)
    fit = fit_flr(T, x, y, scenario.filter, lam)
    payload = fit.to_dict()
    if truth is not None:
        err = error_triple(fit.beta_hat, truth.beta_star, truth.T, truth.C)
        payload["errors"] = {"l2": err.l2, "rkhs": err.rkhs, "pred": err.pred}
        print(f"fit n={n} lambda={fit.lambda_used:.4g}: L2 error {err.l2:.4g}")
    else:
        payload["errors"] = "unavailable"
        print(f"fit n={n} lambda={fit.lambda_used:.4g}: no truth, errors unavailable")
    run.write_json("fit.json", payload)
    return run.finish(EXIT_OK)


COMMANDS = {
    "filters-check": cmd_filters_check,
    "rates": cmd_rates,
    "lowerbound": cmd_lowerbound,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flr",
        description="Spectrally regularized functional linear regression experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON or key=value config file")
        p.add_argument("--preset", choices=preset_names(), help="start from a shipped preset")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.seed)
        out = args.out or Path(cfg.data["output"]["dir"])
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
