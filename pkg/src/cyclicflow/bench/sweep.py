"""One-parameter sweeps over scenario configurations."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..cycler import RunResult, convergence_rate
from ..errors import CyclicFlowError, ConfigError, InsufficientDataError
from .config import ScenarioConfig
from .scenarios import run_config

AXES = ("L", "nu", "period", "Re")

#: environment variable holding the number of worker processes
WORKERS_ENV = "CYCLICFLOW_WORKERS"


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    axis: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ConfigError("sweep needs at least one value")
        if any(not v > 0 for v in values):
            raise ConfigError("sweep values must be positive")
        diffs = [b - a for a, b in zip(values, values[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ConfigError(f"sweep values must be strictly monotone, got {values}")
        if self.axis == "Re" and self.base.scenario != "annulus":
            raise ConfigError("the Re axis applies to the annulus scenario only")
        object.__setattr__(self, "values", values)

    def configs(self) -> list[ScenarioConfig]:
        return [self.base.with_value(self.axis, v) for v in self.values]


@dataclass
class SweepRow:
    axis_value: float
    method: str
    cycles: int | None
    sigma_tail: float | None
    converged: bool
    fallback_cycles: int = 0
    error: str | None = None


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    runs: dict = field(default_factory=dict)  # (axis_value, method) -> RunResult

    def row(self, axis_value: float, method: str) -> SweepRow:
        for r in self.rows:
            if r.axis_value == axis_value and r.method == method:
                return r
        raise KeyError((axis_value, method))


def _tail(result: RunResult):
    try:
        return convergence_rate(result.reports).sigma_geometric_mean_tail
    except InsufficientDataError:
        return None


def _run_point(args):
    value, config = args
    rows, runs = [], {}
    try:
        results = run_config(config)
    except CyclicFlowError as exc:
        for method in config.methods:
            rows.append(SweepRow(value, method, None, None, False, 0, f"{type(exc).__name__}: {exc}"))
        return rows, runs
    for method, result in results.items():
        rows.append(SweepRow(value, method, result.cycles_used, _tail(result), result.converged, result.fallback_cycles))
        runs[(value, method)] = result
    return rows, runs


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every sweep point; rows are ordered by axis value, then method."""
    workers = worker_count() if workers is None else workers
    jobs = list(zip(spec.values, spec.configs()))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outputs = list(pool.map(_run_point, jobs))
    else:
        outputs = [_run_point(job) for job in jobs]
    rows, runs = [], {}
    for r, d in outputs:
        rows.extend(r)
        runs.update(d)
    return SweepResult(spec, rows, runs)
