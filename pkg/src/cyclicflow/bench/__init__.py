"""Scenarios, sweeps, reports and the command line interface."""

from .config import ScenarioConfig, config_hash, load_config, loads_config, dumps_config
from .report import emit_report
from .scenarios import build, run_config, scenario_annulus, scenario_manufactured, scenario_square_tanh
from .sweep import SweepResult, SweepRow, SweepSpec, run_sweep

__all__ = [
    "ScenarioConfig",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "build",
    "config_hash",
    "dumps_config",
    "emit_report",
    "load_config",
    "loads_config",
    "run_config",
    "run_sweep",
    "scenario_annulus",
    "scenario_manufactured",
    "scenario_square_tanh",
]
