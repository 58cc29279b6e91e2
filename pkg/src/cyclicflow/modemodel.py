"""Scalar analysis of forward cycling and the averaging scheme.

On the diagonalized Stokes system every eigenmode evolves independently.
A mode is characterized by its stiffness ``s = lambda * nu * P``; after one
cycle of the averaging scheme its error is multiplied by

    rho(s)   = exp(-s) (1 + 1/s) - 1/s                       (exact in time)
    rho_N(s) = (1 - s / (N + theta s))**N (1 + 1/s) - 1/s    (theta-scheme)

while plain forward cycling multiplies it by ``exp(-s)`` or ``q**N`` with
``q = (1 - nu k (1 - theta) lambda) / (1 + nu k theta lambda)``.

Everything here is a pure function of plain values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError

#: below this stiffness the closed forms lose digits to cancellation
SERIES_CROSSOVER = 1e-4

#: coarse scan used to bracket the extremum before golden-section refinement
SCAN_POINTS = 10_000

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class ModeParams:
    """One Stokes eigenmode: eigenvalue ``lam``, viscosity ``nu`` and period."""

    lam: float
    nu: float
    period: float

    def __post_init__(self):
        for name in ("lam", "nu", "period"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    @property
    def stiffness(self) -> float:
        return self.lam * self.nu * self.period


@dataclass(frozen=True)
class DiscreteSchemeParams:
    """Time discretization of one period: ``steps`` theta-steps with parameter ``theta``."""

    steps: int
    theta: float = 0.5

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be an integer >= 1, got {self.steps!r}")
        if not (0.5 <= self.theta <= 1.0):
            raise DomainError(f"theta must lie in [1/2, 1], got {self.theta!r}")

    def step_size(self, period: float) -> float:
        return period / self.steps


@dataclass(frozen=True)
class ReductionReport:
    argmax_s: float
    sup_abs_rho: float
    evaluations: int


def theta_shifted(N: int) -> float:
    """Shifted Crank-Nicolson parameter ``1/2 + 1/(2N)``."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be an integer >= 1, got {N!r}")
    return 0.5 + 0.5 / N


def _as_stiffness(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("stiffness s must be > 0")
    return arr


def _finish(arr, scalar):
    return float(arr) if scalar else arr


def rho_continuous(s):
    """Averaging-scheme reduction factor for exact time integration.

    Accepts a scalar or an array of stiffness values ``s > 0``.
    """
    scalar = np.ndim(s) == 0
    s = _as_stiffness(s)
    small = s < SERIES_CROSSOVER
    out = np.empty_like(s)
    ss = s[small]
    out[small] = ss * (-1.0 / 2 + ss * (1.0 / 3 + ss * (-1.0 / 8 + ss / 30)))
    sl = s[~small]
    # exp(-s)(1 + 1/s) - 1/s == (expm1(-s)(1 + s) + s) / s
    out[~small] = (np.expm1(-sl) * (1.0 + sl) + sl) / sl
    return _finish(out, scalar)


def _discrete_series_coefficients(N, theta):
    t = theta
    c1 = -(N - 2 * t + 1) / (2 * N)
    c2 = (N**2 - 3 * t**2 + 3 * t - 1) / (3 * N**2)
    c3 = -(
        N**3 + 4 * N**2 * t - 2 * N**2 - 4 * N * t**2 + 4 * N * t - N
        - 8 * t**3 + 12 * t**2 - 8 * t + 2
    ) / (8 * N**3)
    c4 = (
        N**4 + 10 * N**3 * t - 5 * N**3 + 15 * N**2 * t**2 - 15 * N**2 * t + 5 * N**2
        - 30 * N * t**3 + 45 * N * t**2 - 25 * N * t + 5 * N
        - 30 * t**4 + 60 * t**3 - 60 * t**2 + 30 * t - 6
    ) / (30 * N**4)
    return c1, c2, c3, c4


def _qN_minus_one(s, N, theta):
    """``q(s)**N - 1`` without cancellation where ``0 < q < 1``."""
    a = s / (N + theta * s)
    out = np.empty_like(s)
    pos = a < 1.0
    out[pos] = np.expm1(N * np.log1p(-a[pos]))
    out[~pos] = (1.0 - a[~pos]) ** N - 1.0
    return out


def rho_discrete(s, scheme: DiscreteSchemeParams):
    """Averaging-scheme reduction factor for the theta-scheme with ``scheme.steps`` steps."""
    scalar = np.ndim(s) == 0
    s = _as_stiffness(s)
    N, theta = scheme.steps, scheme.theta
    small = s < SERIES_CROSSOVER
    out = np.empty_like(s)
    c1, c2, c3, c4 = _discrete_series_coefficients(N, theta)
    ss = s[small]
    out[small] = ss * (c1 + ss * (c2 + ss * (c3 + ss * c4)))
    sl = s[~small]
    x = _qN_minus_one(sl, N, theta)
    out[~small] = (x * (1.0 + sl) + sl) / sl
    return _finish(out, scalar)


def _golden_max(f, a, b, tol):
    """Golden-section search for the maximum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x), evaluations)``.
    """
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    evals = 2
    while h > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
        evals += 1
    if fc > fd:
        return c, fc, evals
    return d, fd, evals


def sup_abs_reduction(
    kind: Literal["continuous", "discrete"],
    bracket: Sequence[float],
    scheme: DiscreteSchemeParams | None = None,
    scan_points: int = SCAN_POINTS,
    rel_tol: float = 1e-8,
) -> ReductionReport:
    """Supremum of ``|rho|`` (or ``|rho_N|``) over a stiffness bracket.

    A log-spaced scan locates the largest sample; golden-section search in
    ``log s`` then refines between the neighbouring samples.
    """
    lo, hi = (float(v) for v in bracket)
    if not (0 < lo < hi and math.isfinite(hi)):
        raise DomainError(f"invalid bracket {bracket!r}")
    if kind == "continuous":
        def absrho(s):
            return np.abs(rho_continuous(s))
    elif kind == "discrete":
        if scheme is None:
            raise DomainError("discrete kind needs a DiscreteSchemeParams")
        def absrho(s):
            return np.abs(rho_discrete(s, scheme))
    else:
        raise DomainError(f"unknown kind {kind!r}")

    grid = np.geomspace(lo, hi, scan_points)
    values = absrho(grid)
    k = int(np.argmax(values))
    best_s, best = float(grid[k]), float(values[k])
    ga = math.log(grid[max(k - 1, 0)])
    gb = math.log(grid[min(k + 1, scan_points - 1)])
    x, fx, evals = _golden_max(lambda t: float(absrho(math.exp(t))), ga, gb, math.log1p(rel_tol))
    if fx > best:
        best_s, best = math.exp(x), fx
    return ReductionReport(argmax_s=best_s, sup_abs_rho=best, evaluations=scan_points + evals)


def forward_step_factor(mode: ModeParams, scheme: DiscreteSchemeParams) -> float:
    """Per-step amplification ``q`` of the theta-scheme for one mode."""
    k = scheme.step_size(mode.period)
    a = mode.nu * k * mode.lam
    return (1.0 - (1.0 - scheme.theta) * a) / (1.0 + scheme.theta * a)


def mode_forward_factor(mode: ModeParams, scheme: DiscreteSchemeParams | None = None) -> float:
    """Per-cycle error multiplier of plain forward cycling for one mode."""
    if scheme is None:
        return math.exp(-mode.stiffness)
    return forward_step_factor(mode, scheme) ** scheme.steps


def simulate_mode_scheme(
    mode: ModeParams,
    scheme: DiscreteSchemeParams | None,
    initial_error: float,
    cycles: int,
    method: Literal["forward", "averaging"],
) -> list[float]:
    """Signed initial-value errors ``e_0, ..., e_cycles`` of one mode.

    The error is propagated through each period (step by step for the
    discrete scheme) and, for the averaging method, corrected by the modal
    solution of the stationary update problem.  The end value ``e(P)`` and
    the increment ``e(P) - e(0)`` are carried separately so that neither
    very stiff nor very soft modes lose digits to cancellation.
    """
    if cycles < 1:
        raise DomainError("cycles must be >= 1")
    if method not in ("forward", "averaging"):
        raise DomainError(f"unknown method {method!r}")
    s = mode.stiffness
    if scheme is not None:
        k = scheme.step_size(mode.period)
        a = mode.nu * k * mode.lam
        # q - 1 and q, exactly
        qm1 = -a / (1.0 + scheme.theta * a)
        q = (1.0 - (1.0 - scheme.theta) * a) / (1.0 + scheme.theta * a)

    errors = [float(initial_error)]
    e0 = float(initial_error)
    for _ in range(cycles):
        if scheme is None:
            end = math.exp(-s) * e0
            incr = math.expm1(-s) * e0
        else:
            end, incr = e0, 0.0
            for _n in range(scheme.steps):
                incr += qm1 * end
                end *= q
        if method == "forward":
            e0 = end
        else:
            # update w = (v(P) - v(0)) / s = -incr / s; new error = e(P) - w
            e0 = end + incr / s
        errors.append(e0)
    return errors
