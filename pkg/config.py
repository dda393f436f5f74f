"""
Run configuration: TOML files (or preset dictionaries) with the unit in every
physical key name.

    [spectrum]
    eta_max_sq_over_omega_a = 0.07
    omega0_over_omega_a = 1.0
    t_c_over_inv_omega_a = 10.0
"""

from __future__ import annotations

import hashlib
import json
import math
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from errors import ConfigError
from spectrum import BathSpectrumSpec, InverseTemperature

# ---------------------------- Sections -------------------------------


@dataclass(frozen=True)
class SpectrumSection:
    eta_max_sq_over_omega_a: float
    omega0_over_omega_a: float
    t_c_over_inv_omega_a: float
    band_lo_over_omega_a: float = 0.0
    band_hi_over_omega_a: float = math.inf

    def to_spec(self) -> BathSpectrumSpec:
        return BathSpectrumSpec.from_memory_time(
            self.eta_max_sq_over_omega_a,
            self.omega0_over_omega_a,
            self.t_c_over_inv_omega_a,
            band=(self.band_lo_over_omega_a, self.band_hi_over_omega_a),
        )


@dataclass(frozen=True)
class TemperatureSection:
    alpha_system: float = math.inf
    alpha_bath: float = math.inf

    @property
    def system(self) -> InverseTemperature:
        return InverseTemperature(self.alpha_system)

    @property
    def bath(self) -> InverseTemperature:
        return InverseTemperature(self.alpha_bath)


@dataclass(frozen=True)
class EngineSection:
    kind: str = "me"
    n_modes: int = 40
    coverage_over_gamma: float = 5.0
    max_quanta: int = 2
    parity_sector: bool = True
    finite_measurements: bool = False
    rethermalize: bool = True
    markov_after_over_t_c: float = 20.0


@dataclass(frozen=True)
class ScheduleSection:
    """Events at pre_relax + first + k * interval, k = 0..count-1."""

    count: int = 0
    interval_over_inv_omega_a: float = 1.0
    first_over_inv_omega_a: float = 0.0
    pre_relax_over_t_c: float = 0.0
    duration_over_inv_omega_a: float = 0.0


@dataclass(frozen=True)
class RunSection:
    horizon_over_inv_omega_a: float = 50.0
    sample_step_over_inv_omega_a: float = 0.05
    mode_sample_step_over_inv_omega_a: float = 1.0


@dataclass(frozen=True)
class ObjectiveSection:
    direction: str = "cool"
    count: int = 10
    dt_min_over_inv_omega_a: float = 0.05
    dt_max_over_inv_omega_a: float = 20.0
    grid_points: int = 400


@dataclass(frozen=True)
class SweepSection:
    alphas: Tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


@dataclass(frozen=True)
class EquilibriumSection:
    alphas: Tuple[float, ...] = (0.5, 1.0, 2.0, 5.0)
    form: str = "ratio"


@dataclass(frozen=True)
class RunConfig:
    spectrum: SpectrumSection
    temperature: TemperatureSection = field(default_factory=TemperatureSection)
    engine: EngineSection = field(default_factory=EngineSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    run: RunSection = field(default_factory=RunSection)
    objective: ObjectiveSection = field(default_factory=ObjectiveSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    equilibrium: EquilibriumSection = field(default_factory=EquilibriumSection)


SECTIONS = {f.name: f for f in fields(RunConfig)}
SECTION_TYPES = {
    "spectrum": SpectrumSection,
    "temperature": TemperatureSection,
    "engine": EngineSection,
    "schedule": ScheduleSection,
    "run": RunSection,
    "objective": ObjectiveSection,
    "sweep": SweepSection,
    "equilibrium": EquilibriumSection,
}
CHOICES = {
    ("engine", "kind"): ("me", "exact"),
    ("objective", "direction"): ("cool", "heat"),
    ("equilibrium", "form"): ("ratio", "linear"),
}


# ---------------------------- Coercion -------------------------------
def _as_float(where: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    out = float(value)
    if math.isnan(out):
        raise ConfigError(f"{where}: NaN is not allowed")
    return out


def _as_int(where: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_bool(where: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    return value


def _as_str(where: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _as_floats(where: str, value: Any) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of numbers, got {value!r}")
    return tuple(_as_float(f"{where}[{i}]", v) for i, v in enumerate(value))


COERCE = {
    "float": _as_float,
    "int": _as_int,
    "bool": _as_bool,
    "str": _as_str,
    "Tuple[float, ...]": _as_floats,
}


def _section(name: str, raw: Any):
    cls = SECTION_TYPES[name]
    if not isinstance(raw, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    values = {}
    for key, f in known.items():
        where = f"{name}.{key}"
        if key not in raw:
            continue
        value = COERCE[f.type](where, raw[key])
        allowed = CHOICES.get((name, key))
        if allowed and value not in allowed:
            raise ConfigError(f"{where}: must be one of {allowed}, got {value!r}")
        values[key] = value
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"[{name}] missing required key(s): {e}") from None


def from_dict(raw: Mapping[str, Any]) -> RunConfig:
    unknown = sorted(set(raw) - set(SECTION_TYPES))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if "spectrum" not in raw:
        raise ConfigError("missing [spectrum] section")
    config = RunConfig(**{name: _section(name, body) for name, body in raw.items()})
    validate(config)
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_dict(raw)


def validate(config: RunConfig) -> None:
    s = config.spectrum
    if s.t_c_over_inv_omega_a <= 0:
        raise ConfigError("spectrum.t_c_over_inv_omega_a must be > 0")
    if s.omega0_over_omega_a <= 0:
        raise ConfigError("spectrum.omega0_over_omega_a must be > 0")
    if s.eta_max_sq_over_omega_a < 0:
        raise ConfigError("spectrum.eta_max_sq_over_omega_a must be >= 0")
    for name in ("alpha_system", "alpha_bath"):
        if getattr(config.temperature, name) < 0:
            raise ConfigError(f"temperature.{name} must be >= 0")
    if config.run.horizon_over_inv_omega_a <= 0 or config.run.sample_step_over_inv_omega_a <= 0:
        raise ConfigError("run.horizon and run.sample_step must be > 0")
    if config.engine.n_modes < 2 or config.engine.max_quanta < 1:
        raise ConfigError("engine.n_modes must be >= 2 and engine.max_quanta >= 1")
    if config.schedule.count < 0:
        raise ConfigError("schedule.count must be >= 0")


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
