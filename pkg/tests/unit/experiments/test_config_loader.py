"""
Unit tests for ampchannel/experiments/config_loader.py.

Every shipped config must load; malformed configs must fail with the key
path of the offending entry.
"""

import copy
import json

import pytest
import yaml

from ampchannel.experiments.config_loader import (
    CONFIGS_DIR,
    ConfigError,
    config_to_dict,
    load_config,
    parse_config,
)
from ampchannel.experiments.config_models import AmplifierKind, ExperimentConfig


def _config_files():
    return sorted(p for p in CONFIGS_DIR.iterdir() if p.suffix in {".json", ".yaml", ".yml"})


@pytest.fixture(params=_config_files(), ids=lambda p: p.stem)
def config_path(request):
    return request.param


VALID = {
    "name": "pia_test",
    "amplifier": {"kind": "pia", "params": {"gain_n": 4.0, "idler_photons": 0.0}},
    "input": {"kind": "coherent", "alpha": 2.0},
    "ensemble": {"seed": 3},
}


# ── Shipped configs ──────────────────────────────────────────────────

class TestShippedConfigs:
    def test_loads(self, config_path):
        cfg = load_config(config_path)
        assert isinstance(cfg, ExperimentConfig)

    def test_name_matches_file(self, config_path):
        assert load_config(config_path).name == config_path.stem

    def test_round_trip(self, config_path):
        cfg = load_config(config_path)
        assert config_to_dict(parse_config(config_to_dict(cfg))) == config_to_dict(cfg)

    def test_bare_name_resolves(self, config_path):
        assert load_config(config_path.stem).name == config_path.stem

    def test_fig3_point(self):
        cfg = load_config("fig3_laser")
        assert cfg.amplifier is AmplifierKind.LASER_FPE
        assert cfg.params.allow_invalid
        assert cfg.input.alpha == 3.95


# ── Loader edge cases ────────────────────────────────────────────────

class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Config file not found"):
            load_config(tmp_path / "absent.json")

    def test_unsupported_extension(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("name = 'x'")
        with pytest.raises(ValueError, match="Unsupported config file extension"):
            load_config(path)

    def test_yaml_and_json_agree(self, tmp_path):
        (tmp_path / "a.json").write_text(json.dumps(VALID))
        (tmp_path / "a.yaml").write_text(yaml.safe_dump(VALID))
        assert config_to_dict(load_config(tmp_path / "a.json")) == config_to_dict(load_config(tmp_path / "a.yaml"))


class TestKeyPathErrors:
    def _broken(self, mutate):
        raw = copy.deepcopy(VALID)
        mutate(raw)
        return raw

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="^extra: unknown key"):
            parse_config(self._broken(lambda r: r.update(extra=1)))

    def test_missing_section(self):
        with pytest.raises(ConfigError, match="^ensemble: required"):
            parse_config(self._broken(lambda r: r.pop("ensemble")))

    def test_unknown_amplifier(self):
        with pytest.raises(ConfigError, match="^amplifier.kind: expected one of"):
            parse_config(self._broken(lambda r: r["amplifier"].update(kind="maser")))

    def test_unknown_param(self):
        with pytest.raises(ConfigError, match=r"^amplifier\.params\.gain: unknown key"):
            parse_config(self._broken(lambda r: r["amplifier"]["params"].update(gain=2.0)))

    def test_missing_param(self):
        with pytest.raises(ConfigError, match=r"^amplifier\.params\.gain_n: required"):
            parse_config(self._broken(lambda r: r["amplifier"].update(params={})))

    def test_missing_idler_photons(self):
        with pytest.raises(ConfigError, match=r"^amplifier\.params\.idler_photons: required"):
            parse_config(self._broken(lambda r: r["amplifier"]["params"].pop("idler_photons")))

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match=r"^amplifier\.params: gain_n must be >= 1"):
            parse_config(self._broken(lambda r: r["amplifier"]["params"].update(gain_n=0.5)))

    def test_missing_seed(self):
        with pytest.raises(ConfigError, match=r"^ensemble\.seed: required"):
            parse_config(self._broken(lambda r: r.update(ensemble={})))

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError, match="^input: expected a mapping"):
            parse_config(self._broken(lambda r: r.update(input=[1, 2])))

    def test_cross_field_error(self):
        def fock_laser(raw):
            raw["amplifier"] = {"kind": "laser_fpe", "params": {
                "C": 4.5, "sigma0": 1.0, "N": 55, "gamma": 1.0, "f": 0.01, "n_s": 55.0, "t": 0.2}}
            raw["input"] = {"kind": "fock", "m": 2}

        with pytest.raises(ConfigError, match="coherent inputs only"):
            parse_config(self._broken(fock_laser))

    def test_error_is_value_error(self):
        with pytest.raises(ValueError):
            parse_config([])
