import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_flr.config import (
    ConfigError,
    RunManifest,
    canonical_json,
    config_hash,
    load_config,
    load_preset,
    load_schema,
    parse_config_text,
    preset_names,
    to_ini,
    validate_config,
)
from spectral_flr.seeding import derive_stream
from spectral_flr.simulate import Scenario

PRESETS = ["comm-brownian-cubic-a05", "comm-saturation-a3", "lowerbound-m16", "noncomm-s1"]


class TestPresets:
    def test_names(self):
        assert preset_names() == PRESETS

    @pytest.mark.parametrize("name", PRESETS)
    def test_each_validates(self, name):
        cfg = load_config(preset=name)
        assert cfg.data["preset"] == name

    def test_scenario_matches_definition(self):
        raw = load_preset("noncomm-s1")["scenario"]
        sc = load_config(preset="noncomm-s1").scenario
        for key, value in raw.items():
            assert getattr(sc, key) == value
        assert isinstance(sc, Scenario)

    def test_acceptance_preset(self):
        cfg = load_config(preset="comm-brownian-cubic-a05")
        sc = cfg.scenario
        assert (sc.mode, sc.spectrum, sc.alpha, sc.filter, sc.M) == (
            "commutative", "brownian-cubic", 0.5, "tikhonov", 256)
        assert cfg.harness["replicates"] == 50
        assert cfg.harness["n_grid"] == [128, 256, 512, 1024, 2048, 4096, 8192]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_config(preset="nope")


class TestValidation:
    def test_defaults(self):
        cfg = validate_config("{}")
        assert cfg.scenario == Scenario()

    def test_range_error_names_field(self):
        with pytest.raises(ConfigError) as err:
            validate_config({"scenario": {"mode": "noncommutative", "spectrum": "power", "t": 0.5}})
        assert any(e.startswith("scenario.t:") and "1" in e for e in err.value.errors)

    def test_two_violations_two_diagnostics(self):
        with pytest.raises(ConfigError) as err:
            validate_config({"scenario": {"sigma": -1}, "lowerbound": {"u": 0.5}})
        assert len(err.value.errors) == 2

    def test_u_must_be_below_one_eighth(self):
        with pytest.raises(ConfigError, match="lowerbound.u"):
            validate_config({"lowerbound": {"u": 0.5}})

    def test_sigma2_positive(self):
        with pytest.raises(ConfigError, match="lowerbound.sigma2"):
            validate_config({"lowerbound": {"sigma2": 0}})

    def test_semantic_checks(self):
        with pytest.raises(ConfigError) as err:
            validate_config({
                "scenario": {"spectrum": "brownian-cubic", "t": 3},
                "harness": {"n_grid": [128, 256, 256, 512], "metrics": ["rkhs"]},
            })
        text = " ".join(err.value.errors)
        assert "t = 4" in text and "strictly increasing" in text

    def test_rkhs_metric_needs_alpha(self):
        with pytest.raises(ConfigError, match="alpha >= 1/2"):
            validate_config({"scenario": {"alpha": 0.3}, "harness": {"metrics": ["rkhs"]}})

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            validate_config({"scenario": {"colour": "blue"}})

    def test_malformed_json(self):
        with pytest.raises(ConfigError, match="JSON parse error"):
            validate_config('{"scenario": ')

    def test_schema_document(self):
        schema = load_schema()
        assert schema["type"] == "object"
        assert "scenario" in schema["properties"]


class TestRoundTrip:
    @pytest.mark.parametrize("name", PRESETS)
    def test_json(self, name):
        cfg = load_config(preset=name)
        text = cfg.to_text()
        again = validate_config(text)
        assert again == cfg
        assert again.to_text() == text

    @pytest.mark.parametrize("name", PRESETS)
    def test_ini(self, name):
        cfg = load_config(preset=name)
        ini = to_ini(cfg.data)
        assert validate_config(ini) == cfg
        assert to_ini(parse_config_text(ini)) == ini

    def test_ini_surface(self):
        cfg = validate_config("[scenario]\nalpha = 1.5\nfilter = cutoff\n[harness]\nreplicates = 30\n")
        assert cfg.scenario.alpha == 1.5
        assert cfg.scenario.filter == "cutoff"
        assert cfg.harness["replicates"] == 30

    def test_hash_stable(self):
        a = load_config(preset="noncomm-s1")
        b = load_config(preset="noncomm-s1")
        assert a.hash == b.hash == config_hash(a.data)
        assert a.with_seed(7).hash != a.hash

    def test_seed_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"scenario": {"alpha": 1.0}}))
        cfg = load_config(path, seed=9)
        assert cfg.scenario.seed == 9 and cfg.lowerbound["seed"] == 9
        assert cfg.scenario.alpha == 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 5.0), st.floats(0.0, 3.0), st.integers(0, 2**31 - 1),
           st.sampled_from(["tikhonov", "cutoff", "showalter", "landweber"]))
    def test_parse_serialize_identity(self, alpha, sigma, seed, fam):
        cfg = validate_config({"scenario": {"alpha": alpha, "sigma": sigma, "seed": seed, "filter": fam}})
        assert validate_config(cfg.to_text()) == cfg
        assert validate_config(to_ini(cfg.data)) == cfg


class TestManifest:
    def test_fields(self):
        m = RunManifest("abc", 3, "0.1.0", "rates")
        m.outputs += ["b.json", "a.json"]
        m.finish(0)
        d = json.loads(canonical_json(m.to_dict()))
        assert d["outputs"] == ["a.json", "b.json"]
        assert d["exit_code"] == 0 and d["finished"] is not None


class TestStreams:
    def test_reproducible(self):
        a = derive_stream(5, [1, 2]).standard_normal(10_000)
        b = derive_stream(5, [1, 2]).standard_normal(10_000)
        np.testing.assert_array_equal(a, b)

    def test_labels_independent(self):
        a = derive_stream(5, [1]).standard_normal(10_000)
        b = derive_stream(5, [2]).standard_normal(10_000)
        assert abs(np.corrcoef(a, b)[0, 1]) <= 0.03

    def test_base_seed_matters(self):
        a = derive_stream(5, [1]).standard_normal(10)
        b = derive_stream(6, [1]).standard_normal(10)
        assert not np.array_equal(a, b)

    def test_label_order_matters(self):
        a = derive_stream(0, [1, 2]).integers(0, 2**62)
        b = derive_stream(0, [2, 1]).integers(0, 2**62)
        assert a != b
