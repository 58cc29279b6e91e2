"""Theta-scheme integration over one period.

Each step solves, on the unknown faces and multiplied by the face mass,

    M (v_n - v_{n-1}) / k + theta [nu K v_n + M N(v_n)]
        + (1 - theta) [nu K v_{n-1} + M N(v_{n-1})] - B^T p_n
        = M ((1 - theta) f_{n-1} + theta f_n),         -B v_n = B_wall g_n

with ``N(v) = (v.grad)v`` (absent for Stokes).  The velocity is written as
``v = v_wall(t) + S psi`` where ``v_wall`` is a discretely divergence-free
extension of the wall data and ``S`` the stream-function basis, so the
pressure drops out; ``p_n`` is recovered afterwards from the momentum
residual.  The discrete solution is the one of the saddle-point form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import StepError, SolverError
from .grid import BoundarySpec, FlowState, StaggeredGrid, VelocityField
from .saddle import PressureSystem, _mass_solver, reduced_stokes_matrices

Problem = Literal["stokes", "navier-stokes"]

#: halvings of the Newton step before a step is declared failed
MAX_HALVINGS = 6


@dataclass(frozen=True)
class ThetaConfig:
    steps: int
    theta: float = 0.5
    period: float = 1.0
    newton_tol: float = 1e-12
    newton_max_iter: int = 20

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be an integer >= 1, got {self.steps!r}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")

    @property
    def step_size(self) -> float:
        return self.period / self.steps

    def time(self, n: int) -> float:
        # exact at n == steps
        return self.period * n / self.steps


@dataclass(frozen=True)
class FlowScenario:
    """Grid, viscosity and (optionally time-dependent) data of one flow problem."""

    grid: StaggeredGrid
    nu: float
    boundary: BoundarySpec | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu!r}")


@dataclass
class StepDiagnostic:
    index: int
    time: float
    newton_iterations: int
    divergence_max: float
    residual: float


@dataclass
class CycleTrace:
    v0: FlowState
    vN: FlowState
    avg_velocity: VelocityField
    avg_pressure: np.ndarray
    per_step_divergence_max: float
    newton_iterations_total: int
    steps: list[StepDiagnostic] = field(default_factory=list)


class _ProductAssembler:
    """``base + sum_t S^T diag(c_t) X_t`` on a fixed sparsity pattern.

    The map from the coefficient vectors ``c_t`` to the nonzeros is linear
    and precomputed once, so each assembly is a single sparse mat-vec.
    """

    def __init__(self, S: sp.csr_matrix, Xs, base: sp.spmatrix):
        S = sp.csr_matrix(S)
        S.sort_indices()
        nr, n = S.shape
        srow = np.repeat(np.arange(nr), np.diff(S.indptr))
        keys, vals, cols = [], [], []
        for t, X in enumerate(Xs):
            X = sp.csr_matrix(X)
            cnt = np.diff(X.indptr)[srow]
            rep = np.repeat(np.arange(S.nnz), cnt)
            offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            xe = np.repeat(X.indptr[srow], cnt) + offs
            keys.append(X.indices[xe].astype(np.int64) * n + S.indices[rep])
            vals.append(S.data[rep] * X.data[xe])
            cols.append(t * nr + srow[rep])
        base = sp.coo_matrix(base)
        bkeys = base.col.astype(np.int64) * n + base.row
        uniq, inv = np.unique(np.concatenate(keys + [bkeys]), return_inverse=True)
        nprod = sum(len(k) for k in keys)
        self.T = sp.csr_matrix(
            (np.concatenate(vals), (inv[:nprod], np.concatenate(cols))), shape=(uniq.size, len(Xs) * nr)
        )
        self.base_data = np.bincount(inv[nprod:], weights=base.data, minlength=uniq.size)
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)
        self.shape = (n, n)

    def matrix(self, coefficients) -> sp.csc_matrix:
        data = self.base_data + self.T @ np.concatenate(coefficients)
        return sp.csc_matrix((data, self.indices, self.indptr), shape=self.shape)


class ThetaStepper:
    """Factorizations and data caches for one (scenario, config, problem)."""

    def __init__(self, scenario: FlowScenario, config: ThetaConfig, problem: Problem = "stokes"):
        if problem not in ("stokes", "navier-stokes"):
            raise ValueError(f"unknown problem {problem!r}")
        g = scenario.grid
        self.grid, self.scenario, self.config, self.problem = g, scenario, config, problem
        self.nu, self.theta, self.k = scenario.nu, config.theta, config.step_size
        self.S = g.stream_basis
        self.St = sp.csr_matrix(self.S.T)
        self.m = g.mass
        self.K_rows = sp.csr_matrix(g.K[g.free])
        Kr, Mr = reduced_stokes_matrices(g)
        self.A0 = sp.csc_matrix(Mr / self.k + self.theta * self.nu * Kr)
        self.pressure = PressureSystem.of(g)
        self.mass_lu = _mass_solver(g)
        self._lu0 = None
        self._jac = None
        self._cache: dict = {}

    # ------------------------------------------------------------ data
    def _data(self, t: float):
        """(wall-data full vector incl. divergence-free extension, forcing on free faces)."""
        b = self.scenario.boundary
        key = float(t) if (b is not None and b.time_dependent) else 0.0
        hit = self._cache.get(key)
        if hit is None:
            g = self.grid
            z = g.boundary_vector(b, t)
            if np.any(z):
                z[g.free] = self.pressure.particular(z)
            f = g.forcing_vector(b, t)[g.free]
            hit = (z, f)
            if len(self._cache) > 4:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = hit
        return hit

    def to_psi(self, v_full: np.ndarray, t: float) -> np.ndarray:
        z, _ = self._data(t)
        d = v_full[self.grid.free] - z[self.grid.free]
        return self.mass_lu.solve(self.St @ (self.m * d))

    def from_psi(self, psi: np.ndarray, t: float) -> np.ndarray:
        z, _ = self._data(t)
        v = z.copy()
        v[self.grid.free] += self.S @ psi
        return v

    def _convection(self, v_full):
        return self.grid.advect_vector(v_full, v_full)[self.grid.free]

    def _jacobian_assembler(self) -> _ProductAssembler:
        if self._jac is None:
            g = self.grid
            Xs = []
            for P, Q in g._advection_pairs:
                Xs.append(sp.csr_matrix(Q[g.free][:, g.free] @ self.S))
                Xs.append(sp.csr_matrix(P[g.free][:, g.free] @ self.S))
            self._jac = _ProductAssembler(self.S, Xs, self.A0)
        return self._jac

    def _jacobian(self, v_full) -> sp.csc_matrix:
        g = self.grid
        cs = []
        for P, Q in g._advection_pairs:
            cs.append(self.theta * self.m * (P @ v_full)[g.free])
            cs.append(self.theta * self.m * (Q @ v_full)[g.free])
        return self._jacobian_assembler().matrix(cs)

    # ------------------------------------------------------------ step
    def step(self, v_old: np.ndarray, psi_old: np.ndarray, t_old: float, t_new: float, index: int = 0):
        """Advance one step; returns ``(v_new, psi_new, p_new, diagnostic)``."""
        g, m, k, th, nu = self.grid, self.m, t_new - t_old, self.theta, self.nu
        z_new, f_new = self._data(t_new)
        _, f_old = self._data(t_old)
        free = g.free
        f_blend = (1.0 - th) * f_old + th * f_new
        const = (
            m * (z_new[free] - v_old[free]) / k
            + th * nu * (self.K_rows @ z_new)
            + (1.0 - th) * nu * (self.K_rows @ v_old)
            - m * f_blend
        )
        nonlinear = self.problem == "navier-stokes"
        if nonlinear:
            const += (1.0 - th) * m * self._convection(v_old)
        rhs0 = self.St @ const
        iterations = 0
        if not nonlinear:
            if self._lu0 is None:
                self._lu0 = spla.splu(self.A0, permc_spec="MMD_AT_PLUS_A")
            psi = self._lu0.solve(-rhs0)
            v_new = self.from_psi(psi, t_new)
            mom = const + m * (self.S @ psi) / k + th * nu * (self.K_rows @ (v_new - z_new))
            residual = 0.0
        else:
            psi, v_new, mom, residual, iterations = self._newton(const, rhs0, psi_old, v_old, t_new, index)
        p_new = self.pressure.pressure_from_residual(mom)
        div = float(np.max(np.abs(g.D @ v_new)))
        return v_new, psi, p_new, StepDiagnostic(index, t_new, iterations, div, residual)

    def _newton(self, const, rhs0, psi0, v_old, t_new, index):
        g, m, th = self.grid, self.m, self.theta
        scale = max(
            np.linalg.norm(self.St @ (m * v_old[g.free])) / self.config.step_size,
            np.linalg.norm(rhs0),
            np.finfo(float).tiny,
        )
        tol = self.config.newton_tol * scale

        z = self._data(t_new)[0]

        def evaluate(psi):
            v = self.from_psi(psi, t_new)
            mom = const + m * (v - z)[g.free] / self.config.step_size
            mom += th * self.nu * (self.K_rows @ (v - z))
            mom += th * m * self._convection(v)
            return v, mom, self.St @ mom

        psi = psi0.copy()
        v, mom, F = evaluate(psi)
        r = np.linalg.norm(F)
        history = [r / scale]
        it = 0
        while r > tol:
            if it >= self.config.newton_max_iter:
                raise StepError(f"Newton did not converge in {it} iterations at step {index}", history, index)
            try:
                lu = spla.splu(self._jacobian(v), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise StepError(f"singular Newton matrix at step {index}: {exc}", history, index) from exc
            delta = -lu.solve(F)
            lam = 1.0
            for _ in range(MAX_HALVINGS + 1):
                trial = psi + lam * delta
                vt, momt, Ft = evaluate(trial)
                rt = np.linalg.norm(Ft)
                if rt < r or rt <= tol:
                    break
                lam *= 0.5
            else:
                raise StepError(f"line search failed at step {index}", history, index)
            psi, v, mom, F, r = trial, vt, momt, Ft, rt
            history.append(r / scale)
            it += 1
        return psi, v, mom, r / scale, it


def _check_problem(problem):
    if problem not in ("stokes", "navier-stokes"):
        raise ValueError(f"unknown problem {problem!r}")


def theta_step(
    state: FlowState,
    t_next: float,
    config: ThetaConfig,
    problem: Problem,
    scenario: FlowScenario,
    stepper: ThetaStepper | None = None,
) -> FlowState:
    """One theta-step from ``state`` (at ``t_next - k``) to ``t_next``."""
    _check_problem(problem)
    stepper = stepper or ThetaStepper(scenario, config, problem)
    g = scenario.grid
    t_old = t_next - config.step_size
    v_old = g.pack(g.with_boundary(state.velocity, scenario.boundary, t_old))
    # same projection onto the divergence-free space as run_cycle
    psi = stepper.to_psi(v_old, t_old)
    v_old = stepper.from_psi(psi, t_old)
    v_new, _, p, _ = stepper.step(v_old, psi, t_old, t_next)
    return FlowState(g.unpack(v_new), p.reshape(g.p_shape), t_next)


def run_cycle(
    v0: FlowState,
    config: ThetaConfig,
    problem: Problem,
    scenario: FlowScenario,
    stepper: ThetaStepper | None = None,
) -> CycleTrace:
    """Integrate ``[0, P]`` from ``v0`` and accumulate the discrete time averages."""
    _check_problem(problem)
    stepper = stepper or ThetaStepper(scenario, config, problem)
    g, th, N = scenario.grid, config.theta, config.steps
    start = g.with_boundary(v0.velocity, scenario.boundary, 0.0)
    v = g.pack(start)
    psi = stepper.to_psi(v, 0.0)
    v = stepper.from_psi(psi, 0.0)
    w = 1.0 / N  # k / P
    avg_v = np.zeros(g.n_full)
    avg_p = np.zeros(g.n_cells)
    steps = []
    for n in range(1, N + 1):
        t_old, t_new = config.time(n - 1), config.time(n)
        try:
            v_new, psi, p, diag = stepper.step(v, psi, t_old, t_new, index=n)
        except StepError as exc:
            exc.step_index = n
            raise
        except SolverError as exc:
            raise StepError(f"step {n}: {exc}", (), n) from exc
        avg_v += w * ((1.0 - th) * v + th * v_new)
        avg_p += w * p
        v = v_new
        steps.append(diag)
    vN = FlowState(g.unpack(v), p.reshape(g.p_shape), config.period)
    return CycleTrace(
        v0=FlowState(start, np.asarray(v0.p, dtype=float).copy(), 0.0),
        vN=vN,
        avg_velocity=g.unpack(avg_v),
        avg_pressure=avg_p.reshape(g.p_shape),
        per_step_divergence_max=max(d.divergence_max for d in steps),
        newton_iterations_total=sum(d.newton_iterations for d in steps),
        steps=steps,
    )


def write_step_diagnostics(steps, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", "newton_iterations", "divergence_max", "residual"])
        for d in steps:
            w.writerow([d.index, repr(d.time), d.newton_iterations, repr(d.divergence_max), repr(d.residual)])
