"""Scenario library: square with tanh forcing, rotating annulus, manufactured flow."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cycler import RunResult, averaging_iterate, forward_iterate
from ..grid import BoundarySpec, GridSpec, build_grid
from ..stepper import FlowScenario, ThetaConfig, ThetaStepper
from .config import ScenarioConfig


@dataclass(frozen=True)
class TanhForcing:
    """``f = tanh(y) / (L P) * sin(2 pi t / P) * (1, 0)``."""

    L: float
    period: float

    def __call__(self, x, y, t):
        fx = np.tanh(y) / (self.L * self.period) * math.sin(2.0 * math.pi * t / self.period)
        return fx, np.zeros_like(x)


@dataclass(frozen=True)
class RotatingWalls:
    """Uniform translation on the inner circle, rigid rotation on the outer one."""

    r: float
    R: float
    period: float

    def __call__(self, x, y, t):
        phase = 2.0 * math.pi * t / self.period
        inner = np.hypot(x, y) < 0.5 * (self.r + self.R)
        outer = math.sin(phase) / (2.0 * self.R)
        gx = np.where(inner, 0.5 * math.cos(phase), -outer * y)
        gy = np.where(inner, 0.5 * math.sin(phase), outer * x)
        return gx, gy


@dataclass(frozen=True)
class CellularFlow:
    """Divergence-free field vanishing to first order on the walls of ``(-L, L)^2``.

    Stream function ``sin^2(X) sin^2(Y)`` with ``X = pi (x + L) / (2L)``.
    """

    L: float

    def _parts(self, x, y):
        c = math.pi / (2.0 * self.L)
        X, Y = c * (np.asarray(x) + self.L), c * (np.asarray(y) + self.L)
        return c, np.sin(X), np.sin(Y), np.sin(2 * X), np.sin(2 * Y), np.cos(2 * X), np.cos(2 * Y)

    def velocity(self, x, y):
        c, sX, sY, s2X, s2Y, _, _ = self._parts(x, y)
        return c * sX**2 * s2Y, -c * s2X * sY**2

    def minus_laplacian(self, x, y):
        c, _, _, s2X, s2Y, c2X, c2Y = self._parts(x, y)
        return -(c**3) * s2Y * (4 * c2X - 2), c**3 * s2X * (4 * c2Y - 2)

    def convection(self, x, y):
        c, sX, sY, s2X, s2Y, c2X, c2Y = self._parts(x, y)
        cx = c**3 * (sX**2 * s2X * s2Y**2 - 2 * s2X * sY**2 * sX**2 * c2Y)
        cy = c**3 * (-2 * sX**2 * s2Y * c2X * sY**2 + s2X**2 * sY**2 * s2Y)
        return cx, cy


@dataclass(frozen=True)
class ManufacturedFlow:
    """Exact periodic solution ``v = a(t) V(x)``, ``p = 0`` with ``a = 1 + sin(2 pi t / P) / 2``."""

    L: float
    nu: float
    period: float
    convective: bool

    @property
    def field(self) -> CellularFlow:
        return CellularFlow(self.L)

    def amplitude(self, t):
        w = 2.0 * math.pi / self.period
        return 1.0 + 0.5 * math.sin(w * t), 0.5 * w * math.cos(w * t)

    def exact(self, x, y, t):
        a, _ = self.amplitude(t)
        vx, vy = self.field.velocity(x, y)
        return a * vx, a * vy

    def forcing(self, x, y, t):
        a, da = self.amplitude(t)
        vx, vy = self.field.velocity(x, y)
        lx, ly = self.field.minus_laplacian(x, y)
        fx = da * vx + self.nu * a * lx
        fy = da * vy + self.nu * a * ly
        if self.convective:
            cx, cy = self.field.convection(x, y)
            fx, fy = fx + a * a * cx, fy + a * a * cy
        return fx, fy


def scenario_square_tanh(L: float = 2.0, nu: float = 0.1, period: float = 1.0, **overrides) -> ScenarioConfig:
    return ScenarioConfig(scenario="square-tanh", L=float(L), nu=float(nu), period=float(period), **overrides)


def scenario_annulus(nu: float, **overrides) -> ScenarioConfig:
    base = dict(period=1.0, steps=20, problem="navier-stokes", r=0.5, R=5.0)
    base.update(overrides)
    return ScenarioConfig(scenario="annulus", nu=float(nu), **base)


def scenario_manufactured(L: float = 2.0, nu: float = 0.1, period: float = 1.0, **overrides) -> ScenarioConfig:
    return ScenarioConfig(scenario="manufactured", L=float(L), nu=float(nu), period=float(period), **overrides)


def boundary_spec(config: ScenarioConfig) -> BoundarySpec:
    if config.scenario == "square-tanh":
        return BoundarySpec(forcing=TanhForcing(config.L, config.period))
    if config.scenario == "annulus":
        return BoundarySpec(velocity=RotatingWalls(config.r, config.R, config.period))
    flow = ManufacturedFlow(config.L, config.nu, config.period, config.problem == "navier-stokes")
    return BoundarySpec(forcing=flow.forcing)


def grid_spec(config: ScenarioConfig) -> GridSpec:
    if config.scenario == "annulus":
        return GridSpec.annulus(config.r, config.R, config.n_r, config.n_th)
    return GridSpec.rectangle(config.L, config.nx, config.ny)


def build(config: ScenarioConfig, grid=None) -> tuple[FlowScenario, ThetaConfig]:
    """Materialize a configuration into solver objects."""
    grid = grid or build_grid(grid_spec(config))
    scenario = FlowScenario(grid, config.nu, boundary_spec(config))
    theta = ThetaConfig(config.steps, config.resolved_theta, config.period)
    grid.check_compatibility(scenario.boundary, 0.0)
    grid.check_compatibility(scenario.boundary, 0.25 * config.period)
    return scenario, theta


def run_config(config: ScenarioConfig, methods=None, on_cycle=None) -> dict[str, RunResult]:
    """Run the configured method(s); returns ``{method: RunResult}`` in method order."""
    scenario, theta = build(config)
    stepper = ThetaStepper(scenario, theta, config.problem)
    out = {}
    for method in methods or config.methods:
        run = forward_iterate if method == "forward" else averaging_iterate
        out[method] = run(
            scenario, theta, None, config.tolerance, config.max_cycles, config.problem, stepper, on_cycle
        )
    return out
