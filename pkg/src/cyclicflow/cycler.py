"""Outer iterations toward the time-periodic state.

``forward_iterate`` restarts every cycle from the end state of the previous.
``averaging_iterate`` additionally solves a stationary update problem with
right-hand side ``(v_N - v_0) / P`` (Stokes, or Oseen linearized at the
cycle average) and restarts from ``v_N + w``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import InsufficientDataError, UpdateSolveError
from .grid import FlowState, VelocityField, norm_l2
from .modemodel import DiscreteSchemeParams, ModeParams, simulate_mode_scheme
from .saddle import compute_stokes_spectrum, solve_oseen_update, solve_stokes_stationary
from .stepper import FlowScenario, Problem, ThetaConfig, ThetaStepper, run_cycle

Method = Literal["forward", "averaging"]

CYCLE_COLUMNS = ["method", "cycle", "periodicity_error", "initial_delta", "sigma", "update_norm", "wall_ms"]

#: number of trailing rates averaged into the headline rate
TAIL_LENGTH = 5


@dataclass
class CycleReport:
    cycle_index: int
    periodicity_error: float
    initial_delta: float
    sigma: float | None = None
    update_norm: float | None = None
    wall_time: float = 0.0
    fallback: bool = False


@dataclass
class RunResult:
    reports: list[CycleReport]
    converged: bool
    cycles_used: int
    final_state: FlowState
    method: Method
    fallback_cycles: int = 0

    @property
    def periodicity_errors(self) -> list[float]:
        return [r.periodicity_error for r in self.reports]


@dataclass(frozen=True)
class RateSummary:
    sigma_series: tuple[float, ...]
    sigma_geometric_mean_tail: float


def _velocity_diff(a: VelocityField, b: VelocityField) -> VelocityField:
    return VelocityField(a.u - b.u, a.v - b.v, a.wall - b.wall)


def _start_state(scenario: FlowScenario, v0_init) -> FlowState:
    g = scenario.grid
    if v0_init is None:
        state = g.zero_state()
    elif isinstance(v0_init, VelocityField):
        state = FlowState(v0_init.copy(), np.zeros(g.p_shape), 0.0)
    else:
        state = FlowState(v0_init.velocity.copy(), np.asarray(v0_init.p, dtype=float).copy(), 0.0)
    state.velocity = g.with_boundary(state.velocity, scenario.boundary, 0.0)
    return state


def _iterate(
    method: Method,
    scenario: FlowScenario,
    config: ThetaConfig,
    v0_init,
    tolerance: float,
    max_cycles: int,
    problem: Problem,
    stepper: ThetaStepper | None,
    on_cycle: Callable[[CycleReport], None] | None,
) -> RunResult:
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if max_cycles < 1:
        raise ValueError("max_cycles must be >= 1")
    g = scenario.grid
    stepper = stepper or ThetaStepper(scenario, config, problem)
    v0 = _start_state(scenario, v0_init)
    reports: list[CycleReport] = []
    fallbacks = 0
    converged = False
    for cycle in range(1, max_cycles + 1):
        t0 = time.perf_counter()
        trace = run_cycle(v0, config, problem, scenario, stepper)
        v0 = trace.v0
        raw = _velocity_diff(trace.vN.velocity, v0.velocity)
        perr = norm_l2(raw, g)
        update_norm = None
        fallback = False
        new_velocity = trace.vN.velocity
        if method == "averaging":
            rhs = VelocityField(raw.u / config.period, raw.v / config.period, raw.wall / config.period)
            try:
                if problem == "stokes":
                    w, _ = solve_stokes_stationary(g, scenario.nu, rhs)
                else:
                    w, _ = solve_oseen_update(g, scenario.nu, trace.avg_velocity, rhs)
            except UpdateSolveError:
                fallback = True
                fallbacks += 1
            else:
                update_norm = norm_l2(w, g)
                new_velocity = g.unpack(g.pack(trace.vN.velocity) + g.pack(w))
        new_velocity = g.with_boundary(new_velocity, scenario.boundary, 0.0)
        delta = norm_l2(_velocity_diff(new_velocity, v0.velocity), g)
        sigma = None
        if cycle >= 3 and reports[-1].initial_delta > 0:
            sigma = delta / reports[-1].initial_delta
        report = CycleReport(cycle, perr, delta, sigma, update_norm, time.perf_counter() - t0, fallback)
        reports.append(report)
        if on_cycle is not None:
            on_cycle(report)
        v0 = FlowState(new_velocity, trace.vN.p, 0.0)
        if perr < tolerance:
            converged = True
            break
    return RunResult(reports, converged, len(reports), v0, method, fallbacks)


def forward_iterate(
    scenario: FlowScenario,
    config: ThetaConfig,
    v0_init=None,
    tolerance: float = 1e-8,
    max_cycles: int = 50,
    problem: Problem = "stokes",
    stepper: ThetaStepper | None = None,
    on_cycle=None,
) -> RunResult:
    """Plain cycling ``v0 := vN`` until ``||vN - v0|| < tolerance``."""
    return _iterate("forward", scenario, config, v0_init, tolerance, max_cycles, problem, stepper, on_cycle)


def averaging_iterate(
    scenario: FlowScenario,
    config: ThetaConfig,
    v0_init=None,
    tolerance: float = 1e-8,
    max_cycles: int = 50,
    problem: Problem = "stokes",
    stepper: ThetaStepper | None = None,
    on_cycle=None,
) -> RunResult:
    """Cycling with the stationary averaging update ``v0 := vN + w``.

    The stopping test uses the raw cycle, before the update is applied.  A
    failed Oseen solve turns that cycle into a plain forward cycle.
    """
    return _iterate("averaging", scenario, config, v0_init, tolerance, max_cycles, problem, stepper, on_cycle)


def convergence_rate(reports: Sequence) -> RateSummary:
    """Experimental rates ``delta_l / delta_(l-1)`` for ``l >= 3`` and their tail mean.

    ``reports`` may be :class:`CycleReport` objects or plain deltas.
    """
    deltas = [r.initial_delta if isinstance(r, CycleReport) else float(r) for r in reports]
    if len(deltas) < 3:
        raise InsufficientDataError(f"need at least 3 cycles, got {len(deltas)}")
    sigmas = tuple(d / p if p > 0 else math.nan for p, d in zip(deltas[1:-1], deltas[2:]))
    tail = [s for s in sigmas[-TAIL_LENGTH:] if math.isfinite(s) and s > 0]
    mean = math.exp(sum(math.log(s) for s in tail) / len(tail)) if tail else math.nan
    return RateSummary(sigmas, mean)


def periodic_reference(
    scenario: FlowScenario,
    config: ThetaConfig,
    problem: Problem = "stokes",
    tolerance: float = 1e-13,
    max_cycles: int = 100,
    stepper: ThetaStepper | None = None,
) -> RunResult:
    """The periodic initial value, by running the averaging scheme to a tight tolerance."""
    return averaging_iterate(scenario, config, None, tolerance, max_cycles, problem, stepper)


@dataclass
class OracleReport:
    deviation: float
    lambdas: list[float]
    before: np.ndarray
    after_pde: np.ndarray
    after_model: np.ndarray
    excited: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def spectral_oracle_check(
    scenario: FlowScenario,
    config: ThetaConfig,
    v0_init=None,
    modes: int = 20,
    reference: FlowState | None = None,
    stepper: ThetaStepper | None = None,
    excitation_floor: float = 1e-6,
) -> OracleReport:
    """Compare one averaging cycle of the Stokes PDE with the per-mode model.

    The initial error is projected onto the ``modes`` lowest discrete
    eigenfunctions; each coefficient is propagated by the scalar averaging
    recurrence and compared with the projection of the PDE result.  Modes
    whose coefficient is below ``excitation_floor * ||error||`` are not
    compared.
    """
    g = scenario.grid
    stepper = stepper or ThetaStepper(scenario, config, "stokes")
    if reference is None:
        reference = periodic_reference(scenario, config, "stokes", stepper=stepper).final_state
    v0 = _start_state(scenario, v0_init)
    pairs = compute_stokes_spectrum(g, scenario.nu, modes)
    basis = np.array([g.pack(p.omega) for p in pairs])
    weights = g.face_weights
    ref = g.pack(reference.velocity)

    def coefficients(vec):
        return basis @ (weights * (vec - ref))

    before = coefficients(g.pack(v0.velocity))
    result = averaging_iterate(scenario, config, v0, 1e-300, 1, "stokes", stepper)
    after = coefficients(g.pack(result.final_state.velocity))
    scheme = DiscreteSchemeParams(config.steps, config.theta)
    model = np.array(
        [
            simulate_mode_scheme(ModeParams(p.lam, scenario.nu, config.period), scheme, c, 1, "averaging")[1]
            for p, c in zip(pairs, before)
        ]
    )
    err0 = norm_l2(g.unpack(g.pack(v0.velocity) - ref), g)
    excited = np.abs(before) >= excitation_floor * err0 if err0 > 0 else np.zeros(len(pairs), dtype=bool)
    if np.any(excited):
        deviation = float(np.max(np.abs(after[excited] - model[excited]) / np.abs(model[excited])))
    else:
        deviation = 0.0
    return OracleReport(deviation, [p.lam for p in pairs], before, after, model, excited)


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def cycle_rows(result: RunResult, timing: bool = True):
    for r in result.reports:
        yield [
            result.method,
            r.cycle_index,
            _fmt(r.periodicity_error),
            _fmt(r.initial_delta),
            _fmt(r.sigma),
            _fmt(r.update_norm),
            f"{r.wall_time * 1e3:.3f}" if timing else "",
        ]


def write_cycle_csv(results, path, timing: bool = True, comments: Sequence[str] = ()) -> None:
    """Per-cycle CSV for one or more runs; ``timing=False`` leaves ``wall_ms`` empty."""
    if isinstance(results, RunResult):
        results = [results]
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CYCLE_COLUMNS)
        for result in results:
            w.writerows(cycle_rows(result, timing))
