"""Run configuration: parsing, validation, presets and run manifests.

A configuration is a JSON object with the sections ``scenario``,
``harness``, ``filters_check``, ``lowerbound``, ``simulate``, ``fit`` and
``output``.  The same content can be written as an INI-style file with one
``[section]`` per JSON section and ``key = value`` lines, where each value
is read as JSON when possible and as a plain string otherwise.  Top-level
keys (``preset``) live in a ``[run]`` section.
"""
from __future__ import annotations

import configparser
import copy
import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .seeding import derive_stream
from .simulate import Scenario

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunManifest",
    "derive_stream",
    "parse_config_text",
    "validate_config",
    "load_config",
    "load_schema",
    "preset_names",
    "load_preset",
    "canonical_json",
    "config_hash",
    "to_ini",
]

SECTIONS = ("scenario", "harness", "filters_check", "lowerbound", "simulate", "fit", "output")

_COMMON_SCENARIO = {
    "t": 4.0,
    "c": 2.0,
    "sigma": 1.0,
    "filter": "tikhonov",
    "seed": 0,
    "mixing_seed": 0,
    "h_decay": 0.55,
    "mixing_amplitude": math.pi / 16,
}
_SCENARIO_DEFAULTS = {
    "commutative": {"spectrum": "brownian-cubic", "M": 256, "alpha": 0.5, "s": None},
    "noncommutative": {"spectrum": "power", "M": 128, "alpha": None, "s": 1.0},
}
_DEFAULTS = {
    "harness": {
        "n_grid": [128, 256, 512, 1024, 2048, 4096, 8192],
        "replicates": 50,
        "lambda_rule": "theorem",
        "tolerances": {},
        "compare_filters": [],
        "score_slopes": True,
    },
    "filters_check": {
        "families": ["tikhonov", "cutoff", "showalter", "landweber"],
        "p_list": {"tikhonov": [1], "cutoff": [1, 2, 4], "showalter": [1, 2, 4],
                   "landweber": [1, 2, 4]},
        "eta": 1.0,
        "grid_size": 512,
    },
    "lowerbound": {
        "mode": "commutative",
        "spectrum": "brownian-cubic",
        "M": 16,
        "t": 4.0,
        "c": 2.0,
        "smoothness": 0.5,
        "n": 1000,
        "sigma2": 1.0,
        "u": 0.1,
        "seed": 0,
    },
    "simulate": {"n": 512, "replicate": 0},
    "fit": {"grid_size": 256},
    "output": {"dir": "flr-out", "svg": True},
}
_METRICS_BY_MODE = {"commutative": ["l2", "pred"], "noncommutative": ["rkhs", "pred"]}
_ALLOWED_METRICS = {"commutative": {"l2", "rkhs", "pred"}, "noncommutative": {"rkhs", "pred"}}
_TOLERANCE_KEYS = {
    "l2", "rkhs", "pred", "commutative-estimation", "commutative-estimation-rkhs",
    "commutative-prediction", "noncommutative-estimation", "noncommutative-prediction",
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def config_hash(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def load_schema() -> dict:
    text = resources.files("spectral_flr").joinpath("config_schema.json").read_text("utf-8")
    return json.loads(text)


def preset_names() -> list[str]:
    root = resources.files("spectral_flr").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    if name not in preset_names():
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(preset_names())}"])
    text = resources.files("spectral_flr").joinpath("presets").joinpath(f"{name}.json").read_text("utf-8")
    return json.loads(text)


def _ini_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def parse_config_text(text: str) -> dict:
    """Read JSON or INI text into a raw (unvalidated) dictionary."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
        if not isinstance(data, dict):
            raise ConfigError(["configuration must be a JSON object"])
        return data
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"INI parse error: {exc}"])
    data = {}
    for section in parser.sections():
        values = {k: _ini_value(v) for k, v in parser.items(section)}
        if section == "run":
            data.update(values)
        else:
            data[section] = values
    return data


def to_ini(data: dict) -> str:
    """The key=value surface of a configuration dictionary."""
    lines = []
    top = {k: v for k, v in data.items() if not isinstance(v, dict)}
    if top:
        lines.append("[run]")
        lines += [f"{k} = {json.dumps(v)}" for k, v in sorted(top.items())]
        lines.append("")
    for section in SECTIONS:
        if section in data:
            lines.append(f"[{section}]")
            lines += [f"{k} = {json.dumps(v, sort_keys=True)}" for k, v in sorted(data[section].items())]
            lines.append("")
    return "\n".join(lines)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "tolerances":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _normalize(data: dict) -> dict:
    out = {k: v for k, v in data.items() if not isinstance(v, dict)}
    sc = dict(data.get("scenario", {}))
    mode = sc.get("mode", "commutative")
    defaults = {"mode": mode, **_COMMON_SCENARIO, **_SCENARIO_DEFAULTS.get(mode, {})}
    sc = {**defaults, **sc}
    for key in ("t", "c", "sigma", "h_decay", "mixing_amplitude", "alpha", "s"):
        if isinstance(sc.get(key), int) and not isinstance(sc.get(key), bool):
            sc[key] = float(sc[key])
    out["scenario"] = sc
    for section, defaults in _DEFAULTS.items():
        merged = _merge(defaults, data.get(section, {}))
        out[section] = merged
    if "metrics" not in out["harness"]:
        out["harness"]["metrics"] = list(_METRICS_BY_MODE.get(mode, ["l2", "pred"]))
    lb = out["lowerbound"]
    for key in ("t", "c", "smoothness", "sigma2", "u"):
        if isinstance(lb.get(key), int) and not isinstance(lb.get(key), bool):
            lb[key] = float(lb[key])
    return out


def _semantic_errors(d: dict) -> list[str]:
    errors = []
    sc, hv, lb = d["scenario"], d["harness"], d["lowerbound"]
    if sc["spectrum"] == "brownian-cubic" and (sc["t"], sc["c"]) != (4.0, 2.0):
        errors.append("scenario: the brownian-cubic spectrum has t = 4 and c = 2")
    if sc["mode"] == "commutative" and sc.get("alpha") is None:
        errors.append("scenario.alpha: commutative mode needs a source exponent alpha > 0")
    if sc["mode"] == "noncommutative" and sc.get("s") is None:
        errors.append("scenario.s: non-commutative mode needs a source exponent s > 0")
    grid = hv["n_grid"]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        errors.append("harness.n_grid: sizes must be strictly increasing")
    bad = set(hv["metrics"]) - _ALLOWED_METRICS.get(sc["mode"], set())
    if bad:
        errors.append(f"harness.metrics: {sorted(bad)} not available in {sc['mode']} mode")
    if (sc["mode"] == "commutative" and "rkhs" in hv["metrics"]
            and sc.get("alpha") is not None and sc["alpha"] < 0.5):
        errors.append("harness.metrics: the RKHS-norm rate is only stated for alpha >= 1/2")
    unknown = set(hv["tolerances"]) - _TOLERANCE_KEYS
    if unknown:
        errors.append(f"harness.tolerances: unknown keys {sorted(unknown)}")
    if lb["spectrum"] == "brownian-cubic" and (lb["t"], lb["c"]) != (4.0, 2.0):
        errors.append("lowerbound: the brownian-cubic spectrum has t = 4 and c = 2")
    return errors


@dataclass(frozen=True)
class RunConfig:
    """A validated, fully defaulted configuration."""

    data: dict

    @property
    def scenario(self) -> Scenario:
        return Scenario.from_dict(self.data["scenario"])

    def section(self, name: str) -> dict:
        return copy.deepcopy(self.data[name])

    @property
    def harness(self) -> dict:
        return self.section("harness")

    @property
    def lowerbound(self) -> dict:
        return self.section("lowerbound")

    def to_text(self) -> str:
        return canonical_json(self.data)

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def with_seed(self, seed: int) -> "RunConfig":
        data = copy.deepcopy(self.data)
        data["scenario"]["seed"] = int(seed)
        data["lowerbound"]["seed"] = int(seed)
        return validate_config(data)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and canonical_json(self.data) == canonical_json(other.data)

    def __hash__(self):
        return hash(self.hash)


def validate_config(source) -> RunConfig:
    """Validate configuration text or a dictionary.

    Every problem is collected; a :class:`ConfigError` lists them all.
    A ``preset`` key starts from that preset and applies the remaining
    keys as overrides.
    """
    raw = parse_config_text(source) if isinstance(source, str) else copy.deepcopy(source)
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be an object"])
    if "preset" in raw:
        raw = _merge(load_preset(str(raw["preset"])), raw)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = [f"{_path(e)}: {e.message}" for e in
              sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))]
    if errors:
        raise ConfigError(errors)
    data = _normalize(raw)
    errors = [f"{_path(e)}: {e.message}" for e in validator.iter_errors(data)]
    errors += _semantic_errors(data)
    if not errors:
        try:
            Scenario.from_dict(data["scenario"])
        except ValueError as exc:
            errors.append(f"scenario: {exc}")
    if errors:
        raise ConfigError(errors)
    return RunConfig(data)


def load_config(path=None, preset: str | None = None, seed: int | None = None) -> RunConfig:
    """Build a configuration from a file and/or a preset, with a seed override."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"])
        data = parse_config_text(text)
    if preset is not None:
        data = {**data, "preset": preset}
    cfg = validate_config(data)
    return cfg if seed is None else cfg.with_seed(seed)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    config_hash: str
    base_seed: int
    tool_version: str
    command: str
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list = field(default_factory=list)
    exit_code: int | None = None

    def finish(self, exit_code: int) -> None:
        self.finished = _now()
        self.exit_code = exit_code

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "base_seed": self.base_seed,
            "tool_version": self.tool_version,
            "command": self.command,
            "started": self.started,
            "finished": self.finished,
            "outputs": sorted(self.outputs),
            "exit_code": self.exit_code,
        }
