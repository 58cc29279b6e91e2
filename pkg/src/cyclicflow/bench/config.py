"""Scenario configuration, its JSON form and provenance hash."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..modemodel import theta_shifted

SCENARIOS = ("square-tanh", "annulus", "manufactured")
PROBLEMS = ("stokes", "navier-stokes")
METHODS = ("forward", "averaging", "both")

#: field -> (JSON type, unit, description); the documented config schema
SCHEMA = {
    "scenario": ("string", "-", "one of square-tanh, annulus, manufactured"),
    "L": ("number", "length", "half-width of the square (-L, L)^2"),
    "nu": ("number", "length^2/time", "kinematic viscosity"),
    "period": ("number", "time", "forcing period P"),
    "steps": ("integer", "-", "time steps per period N"),
    "theta": ("number|string", "-", "theta in [1/2, 1], or \"shifted\" for 1/2 + 1/(2N)"),
    "nx": ("integer", "cells", "square cells in x"),
    "ny": ("integer", "cells", "square cells in y"),
    "r": ("number", "length", "annulus inner radius"),
    "R": ("number", "length", "annulus outer radius"),
    "n_r": ("integer", "cells", "annulus cells in radius"),
    "n_th": ("integer", "cells", "annulus cells in angle (even)"),
    "problem": ("string", "-", "stokes or navier-stokes"),
    "method": ("string", "-", "forward, averaging or both"),
    "tolerance": ("number", "velocity*length", "stop when the L2 periodicity error drops below"),
    "max_cycles": ("integer", "cycles", "cycle cap per run"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "square-tanh"
    L: float = 2.0
    nu: float = 0.1
    period: float = 1.0
    steps: int = 20
    theta: float | str = 0.5
    nx: int = 48
    ny: int = 48
    r: float = 0.5
    R: float = 5.0
    n_r: int = 24
    n_th: int = 96
    problem: str = "stokes"
    method: str = "both"
    tolerance: float = 1e-8
    max_cycles: int = 50

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("L", "nu", "period", "r", "R", "tolerance"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        for name in ("steps", "nx", "ny", "n_r", "n_th", "max_cycles"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.theta, str):
            if self.theta != "shifted":
                raise ConfigError(f"theta must be a number or \"shifted\", got {self.theta!r}")
        elif isinstance(self.theta, bool) or not 0.5 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [1/2, 1], got {self.theta!r}")
        if self.r >= self.R:
            raise ConfigError(f"annulus needs r < R, got r={self.r}, R={self.R}")

    @property
    def resolved_theta(self) -> float:
        return theta_shifted(self.steps) if self.theta == "shifted" else float(self.theta)

    @property
    def reynolds(self) -> float:
        """Boundary speed 1/2 times the outer diameter over viscosity (annulus)."""
        return self.R / self.nu

    @property
    def methods(self) -> tuple[str, ...]:
        return ("forward", "averaging") if self.method == "both" else (self.method,)

    def with_value(self, axis: str, value) -> "ScenarioConfig":
        if axis == "Re":
            return replace(self, nu=self.R / float(value))
        if axis not in ("L", "nu", "period"):
            raise ConfigError(f"unknown sweep axis {axis!r}")
        return replace(self, **{axis: float(value)})


def config_to_dict(config: ScenarioConfig) -> dict:
    return asdict(config)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    values = dict(data)
    # JSON has one number type; accept 2.0 for integer fields
    for f in fields(ScenarioConfig):
        v = values.get(f.name)
        if f.type == "int" and isinstance(v, float) and v.is_integer():
            values[f.name] = int(v)
        if f.type == "float" and isinstance(v, int) and not isinstance(v, bool):
            values[f.name] = float(v)
    if isinstance(values.get("theta"), int) and not isinstance(values["theta"], bool):
        values["theta"] = float(values["theta"])
    return ScenarioConfig(**values)


def dumps_config(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, indent=2)


def loads_config(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads_config(text)


def config_hash(config: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON of the fully resolved configuration."""
    data = config_to_dict(config)
    data["theta"] = config.resolved_theta
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
