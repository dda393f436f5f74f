"""
Tests for TOML run configurations and the preset dictionaries.

Run: pytest tests/test_config.py -v
"""

import copy
import math
import sys
from pathlib import Path

import pytest

from config import config_hash, from_dict, load_config
from errors import ConfigError
from presets import presets_data

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {
    "spectrum": {
        "eta_max_sq_over_omega_a": 0.07,
        "omega0_over_omega_a": 1.0,
        "t_c_over_inv_omega_a": 10.0,
    }
}


def with_value(section: str, key: str, value) -> dict:
    raw = copy.deepcopy(MINIMAL)
    raw.setdefault(section, {})[key] = value
    return raw


# ═══════════════════════════════════════════════════════════════════
# Loading
# ═══════════════════════════════════════════════════════════════════

class TestLoad:
    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.stem)
    def test_shipped_configs(self, path):
        config = load_config(path)
        assert config.spectrum.t_c_over_inv_omega_a > 0

    @pytest.mark.parametrize("name", sorted(presets_data))
    def test_presets(self, name):
        from_dict(presets_data[name])

    def test_toml_inf_is_zero_temperature(self):
        config = load_config(CONFIG_DIR / "exact_check.toml")
        assert math.isinf(config.temperature.alpha_bath)
        assert config.temperature.bath.is_zero

    def test_defaults(self):
        config = from_dict(MINIMAL)
        assert config.engine.kind == "me"
        assert config.schedule.count == 0
        assert config.spectrum.to_spec().t_c == pytest.approx(10.0)

    def test_int_accepted_for_float(self):
        config = from_dict(with_value("run", "horizon_over_inv_omega_a", 30))
        assert config.run.horizon_over_inv_omega_a == 30.0

    def test_lists_become_tuples(self):
        config = from_dict(with_value("sweep", "alphas", [1, 2.5]))
        assert config.sweep.alphas == (1.0, 2.5)

    def test_requirements_pin_tomllib_python(self):
        text = (CONFIG_DIR.parent / "requirements.txt").read_text(encoding="utf-8")
        assert "Python >= 3.11" in text
        assert sys.version_info >= (3, 11)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[spectrum\neta = ", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)


# ═══════════════════════════════════════════════════════════════════
# Validation
# ═══════════════════════════════════════════════════════════════════

class TestValidation:
    def test_missing_spectrum(self):
        with pytest.raises(ConfigError, match="spectrum"):
            from_dict({"run": {"horizon_over_inv_omega_a": 5.0}})

    def test_missing_required_key(self):
        raw = copy.deepcopy(MINIMAL)
        del raw["spectrum"]["t_c_over_inv_omega_a"]
        with pytest.raises(ConfigError, match="missing"):
            from_dict(raw)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            from_dict({**MINIMAL, "plot": {}})

    def test_key_without_unit(self):
        with pytest.raises(ConfigError, match="unknown key"):
            from_dict(with_value("run", "horizon", 5.0))

    @pytest.mark.parametrize(
        "section, key, value",
        [
            ("run", "horizon_over_inv_omega_a", "long"),
            ("engine", "n_modes", 4.5),
            ("engine", "parity_sector", 1),
            ("schedule", "count", True),
            ("sweep", "alphas", []),
            ("objective", "direction", 3),
        ],
    )
    def test_wrong_type(self, section, key, value):
        with pytest.raises(ConfigError, match="expected"):
            from_dict(with_value(section, key, value))

    @pytest.mark.parametrize(
        "section, key, value",
        [("engine", "kind", "lindblad"), ("objective", "direction", "warm"), ("equilibrium", "form", "pade")],
    )
    def test_bad_choice(self, section, key, value):
        with pytest.raises(ConfigError, match="one of"):
            from_dict(with_value(section, key, value))

    def test_nan_rejected(self):
        with pytest.raises(ConfigError, match="NaN"):
            from_dict(with_value("run", "sample_step_over_inv_omega_a", float("nan")))

    @pytest.mark.parametrize(
        "section, key, value",
        [
            ("spectrum", "t_c_over_inv_omega_a", 0.0),
            ("spectrum", "eta_max_sq_over_omega_a", -0.1),
            ("temperature", "alpha_bath", -1.0),
            ("engine", "n_modes", 1),
            ("schedule", "count", -2),
        ],
    )
    def test_out_of_range(self, section, key, value):
        with pytest.raises(ConfigError):
            from_dict(with_value(section, key, value))

    def test_section_must_be_a_table(self):
        with pytest.raises(ConfigError, match="table"):
            from_dict({**MINIMAL, "run": 5})


# ═══════════════════════════════════════════════════════════════════
# Hashing
# ═══════════════════════════════════════════════════════════════════

class TestHash:
    def test_stable(self):
        assert config_hash(from_dict(MINIMAL)) == config_hash(from_dict(copy.deepcopy(MINIMAL)))

    def test_sha256_hex(self):
        digest = config_hash(from_dict(MINIMAL))
        assert len(digest) == 64
        int(digest, 16)

    def test_changes_with_values(self):
        base = config_hash(from_dict(MINIMAL))
        assert config_hash(from_dict(with_value("run", "horizon_over_inv_omega_a", 51.0))) != base

    def test_explicit_default_hashes_like_omitted(self):
        explicit = with_value("engine", "kind", "me")
        assert config_hash(from_dict(explicit)) == config_hash(from_dict(MINIMAL))
