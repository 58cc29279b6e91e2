"""Stationary saddle-point solves and the discrete Stokes spectrum.

All systems act on the unknown (interior) faces of a :class:`StaggeredGrid`
and are multiplied through by the face mass, so the Stokes block
``nu K`` is symmetric.  The pressure constant is removed with a Lagrange
multiplier against the cell weights, i.e. every returned pressure has zero
discrete mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, UpdateSolveError
from .grid import StaggeredGrid, VelocityField, _as_velocity

#: relative momentum residual every stationary solve must reach
RESIDUAL_TOL = 1e-10

#: below this many stream-function unknowns the spectrum is computed densely
DENSE_SPECTRUM_LIMIT = 1500


def grid_cache(grid: StaggeredGrid) -> dict:
    """Per-grid store for factorizations that depend only on the grid."""
    return grid.__dict__.setdefault("_solver_cache", {})


def _splu(matrix, what, permc_spec="COLAMD"):
    try:
        return spla.splu(sp.csc_matrix(matrix), permc_spec=permc_spec)
    except RuntimeError as exc:
        raise SolverError(f"{what}: factorization failed ({exc})", {"shape": matrix.shape}) from exc


def _mean_free(grid: StaggeredGrid, p: np.ndarray) -> np.ndarray:
    w = grid.cell_weights.ravel()
    return p - (w @ p) / w.sum()


class SaddleSystem:
    """Bordered system ``[[A, -B^T, 0], [-B, 0, w], [0, w^T, 0]]``.

    ``A`` acts on unknown faces, ``B`` is the weighted divergence and ``w``
    the cell weights enforcing the pressure gauge.  Factorized once on
    construction; :meth:`solve` may be called any number of times.
    """

    def __init__(self, grid: StaggeredGrid, A, symmetric: bool, what: str = "saddle system"):
        self.grid = grid
        self.A = sp.csr_matrix(A)
        self.B = grid.B
        self.symmetric = symmetric
        self.what = what
        w = sp.csr_matrix(grid.cell_weights.reshape(-1, 1))
        self.matrix = sp.bmat(
            [[self.A, -self.B.T, None], [-self.B, None, w], [None, w.T, None]], format="csc"
        )
        self._lu = _splu(self.matrix, what)
        self.n_u = grid.n_free
        self.n_p = grid.n_cells

    def _raw(self, rhs):
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError(f"{self.what}: non-finite solution", {"shape": self.matrix.shape})
        return x

    def solve(self, f: np.ndarray, g: np.ndarray | None = None, max_refine: int = 3):
        """Solve ``A u - B^T p = f``, ``-B u = g``; returns ``(u, p, relative_residual)``."""
        rhs = np.zeros(self.matrix.shape[0])
        rhs[: self.n_u] = f
        if g is not None:
            rhs[self.n_u : self.n_u + self.n_p] = g
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        x = self._raw(rhs)
        rel = np.linalg.norm(rhs - self.matrix @ x) / scale
        for _ in range(max_refine):
            if rel <= 0.01 * RESIDUAL_TOL:
                break
            x = x + self._raw(rhs - self.matrix @ x)
            rel = np.linalg.norm(rhs - self.matrix @ x) / scale
        u = x[: self.n_u]
        p = _mean_free(self.grid, x[self.n_u : self.n_u + self.n_p])
        if np.linalg.norm(rhs) == 0.0:
            rel = 0.0
        if rel > RESIDUAL_TOL:
            raise SolverError(
                f"{self.what}: relative residual {rel:.2e} above {RESIDUAL_TOL:.0e}",
                {"relative_residual": rel, "condition_estimate": self.condition_estimate()},
            )
        return u, p, rel

    def condition_estimate(self) -> float:
        """Crude 1-norm condition estimate from the LU factors."""
        try:
            inv = spla.LinearOperator(self.matrix.shape, matvec=self._lu.solve, rmatvec=lambda y: self._lu.solve(y, trans="T"))
            return float(spla.norm(self.matrix, 1) * spla.onenormest(inv))
        except Exception:  # diagnostic only
            return math.nan


class PressureSystem:
    """Pressure Poisson operator ``B M^-1 B^T`` with a zero-mean gauge.

    Used to extend Dirichlet data to discretely divergence-free fields and
    to recover pressures from momentum residuals.
    """

    def __init__(self, grid: StaggeredGrid):
        self.grid = grid
        Minv = sp.diags(1.0 / grid.mass)
        L = grid.B @ Minv @ grid.B.T
        w = sp.csr_matrix(grid.cell_weights.reshape(-1, 1))
        self.matrix = sp.bmat([[L, w], [w.T, None]], format="csc")
        self._lu = _splu(self.matrix, "pressure Poisson system")

    @classmethod
    def of(cls, grid: StaggeredGrid) -> "PressureSystem":
        cache = grid_cache(grid)
        if "pressure" not in cache:
            cache["pressure"] = cls(grid)
        return cache["pressure"]

    def _solve(self, rhs_cells):
        x = self._lu.solve(np.concatenate([rhs_cells, [0.0]]))
        return x[:-1]

    def pressure_from_residual(self, r: np.ndarray) -> np.ndarray:
        """``p`` with ``B^T p = r`` for a residual ``r`` in the range of ``B^T``."""
        g = self.grid
        return _mean_free(g, self._solve(g.B @ (r / g.mass)))

    def particular(self, full: np.ndarray) -> np.ndarray:
        """Interior faces of a gradient field that makes ``full``'s wall data divergence-free."""
        g = self.grid
        src = g.B_fixed @ full[g.fixed]
        src = src - src.mean()  # roundoff of the compatibility condition
        phi = self._solve(src)
        return -(g.B.T @ phi) / g.mass


def _field_from_free(grid: StaggeredGrid, u_free: np.ndarray) -> VelocityField:
    vec = np.zeros(grid.n_full)
    vec[grid.free] = u_free
    return grid.unpack(vec)


def _rhs_free(grid: StaggeredGrid, rhs) -> np.ndarray:
    return grid.pack(_as_velocity(rhs))[grid.free]


def stokes_system(grid: StaggeredGrid, nu: float) -> SaddleSystem:
    """Cached factorized stationary Stokes system ``nu K`` for this grid."""
    if not nu > 0:
        raise SolverError(f"viscosity must be positive, got {nu}")
    cache = grid_cache(grid)
    key = ("stokes", float(nu))
    if key not in cache:
        cache[key] = SaddleSystem(grid, nu * grid.K_free, symmetric=True, what="stationary Stokes system")
    return cache[key]


def solve_stokes_stationary(grid: StaggeredGrid, nu: float, rhs):
    """``-nu Delta w + grad q = rhs``, ``div w = 0``, ``w = 0`` on the walls."""
    f = grid.mass * _rhs_free(grid, rhs)
    u, p, _ = stokes_system(grid, nu).solve(f)
    return _field_from_free(grid, u), p.reshape(grid.p_shape)


def oseen_matrix(grid: StaggeredGrid, nu: float, avg_velocity) -> sp.csr_matrix:
    """``w -> M[(w.grad)a + (a.grad)w] + nu K w`` on unknown faces, linearized at ``a``."""
    a = grid.pack(_as_velocity(avg_velocity))
    Jb, Ja = grid.advection_jacobians(a, a)
    J = (Jb + Ja)[grid.free][:, grid.free]
    return sp.csr_matrix(nu * grid.K_free + sp.diags(grid.mass) @ J)


def solve_oseen_update(grid: StaggeredGrid, nu: float, avg_velocity, rhs):
    """Linearized update ``(w.grad)a + (a.grad)w - nu Delta w + grad q = rhs``.

    ``a`` is the cycle-averaged velocity.  Failures are raised as
    :class:`UpdateSolveError` so the caller can fall back to a plain cycle.
    """
    a = grid.pack(_as_velocity(avg_velocity))
    if not np.any(a):
        return solve_stokes_stationary(grid, nu, rhs)
    f = grid.mass * _rhs_free(grid, rhs)
    if not np.any(f):
        return grid.zero_velocity(), np.zeros(grid.p_shape)
    try:
        system = SaddleSystem(grid, oseen_matrix(grid, nu, avg_velocity), symmetric=False, what="Oseen update")
        u, p, _ = system.solve(f)
    except SolverError as exc:
        raise UpdateSolveError(str(exc), exc.diagnostic) from exc
    return _field_from_free(grid, u), p.reshape(grid.p_shape)


# ------------------------------------------------------------------ spectrum
@dataclass
class EigenPair:
    lam: float
    omega: VelocityField
    nu: float = 1.0
    residual: float = 0.0

    @property
    def decay_rate(self) -> float:
        return self.nu * self.lam


def reduced_stokes_matrices(grid: StaggeredGrid):
    """``(S^T K S, S^T M S)`` on the stream-function space, cached per grid."""
    cache = grid_cache(grid)
    if "reduced" not in cache:
        S = grid.stream_basis
        K = sp.csr_matrix(S.T @ grid.K_free @ S)
        M = sp.csr_matrix(S.T @ sp.diags(grid.mass) @ S)
        cache["reduced"] = (K, M)
    return cache["reduced"]


def compute_stokes_spectrum(grid: StaggeredGrid, nu: float, count: int) -> list[EigenPair]:
    """The ``count`` smallest eigenpairs of the divergence-free Stokes operator.

    Eigenfunctions are orthonormal in the discrete L2 product; ``lam`` is
    the eigenvalue of ``-Delta`` (decay rate ``nu * lam``).
    """
    Kr, Mr = reduced_stokes_matrices(grid)
    n = Kr.shape[0]
    if not 1 <= count <= n:
        raise SolverError(f"count must lie in [1, {n}], got {count}")
    if n <= DENSE_SPECTRUM_LIMIT or count > n // 2:
        lam, vec = sla.eigh(Kr.toarray(), Mr.toarray(), subset_by_index=[0, count - 1])
    else:
        try:
            lam, vec = spla.eigsh(Kr.tocsc(), k=count, M=Mr.tocsc(), sigma=0.0, which="LM", v0=np.ones(n), tol=1e-14)
        except spla.ArpackError as exc:
            raise SolverError(f"eigensolver did not converge: {exc}", {"count": count}) from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
    # renormalize in the mass product (dense path already does, eigsh nearly)
    vec = vec / np.sqrt(np.einsum("ij,ij->j", vec, Mr @ vec))
    mass_lu = _mass_solver(grid)
    S = grid.stream_basis
    pairs = []
    for j in range(count):
        r = Kr @ vec[:, j] - lam[j] * (Mr @ vec[:, j])
        res = float(math.sqrt(max(r @ mass_lu.solve(r), 0.0)))
        pairs.append(EigenPair(float(lam[j]), _field_from_free(grid, S @ vec[:, j]), float(nu), res))
    return pairs


def _mass_solver(grid: StaggeredGrid):
    cache = grid_cache(grid)
    if "reduced_mass_lu" not in cache:
        cache["reduced_mass_lu"] = _splu(reduced_stokes_matrices(grid)[1], "reduced mass", "MMD_AT_PLUS_A")
    return cache["reduced_mass_lu"]


def project_divergence_free(grid: StaggeredGrid, vel) -> np.ndarray:
    """Stream-function coefficients of the mass-orthogonal projection of ``vel``."""
    S = grid.stream_basis
    u = grid.pack(_as_velocity(vel))[grid.free]
    return _mass_solver(grid).solve(S.T @ (grid.mass * u))


def export_spectrum_csv(pairs, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lambda", "decay_rate", "residual"])
        for i, pair in enumerate(pairs, start=1):
            w.writerow([i, repr(pair.lam), repr(pair.decay_rate), repr(pair.residual)])
