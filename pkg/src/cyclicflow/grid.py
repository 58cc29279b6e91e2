"""Staggered (MAC) discretization on a rectangle or an annulus.

Both domains are handled as orthogonal tensor grids in coordinates
``(xi, eta)``:

* rectangle ``(-L, L)^2``: ``xi = x``, ``eta = y``, walls on all four sides;
* annulus ``r < |x| < R``: ``xi = radius``, ``eta = angle``, walls at both
  radii and periodic in the angle.

``u`` lives on xi-faces, ``v`` on eta-faces and ``p`` at cell centres.
Every velocity is stored as one *full vector*: all u-faces, all v-faces and
the tangential wall values that the one-sided stencils need.  Unknowns are
the interior faces; everything else is Dirichlet data.

The viscous operator is assembled in the symmetric form

    K = C^T W_n C + D^T W_c D

(discrete curl ``C`` at nodes, divergence ``D`` at cells, quadrature weights
``W``), which on divergence-free fields is ``-Delta`` including the polar
metric terms.  Tangential wall data enter the boundary vorticity through a
half-size dual cell, which is the same as a mirrored (linearly
extrapolated) ghost value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp

from .errors import GridError

VectorFunction = Callable[[np.ndarray, np.ndarray, float], tuple]


@dataclass(frozen=True)
class GridSpec:
    kind: Literal["rectangle", "annulus"]
    L: float = 0.0
    nx: int = 0
    ny: int = 0
    r: float = 0.0
    R: float = 0.0
    n_r: int = 0
    n_th: int = 0

    @classmethod
    def rectangle(cls, L: float, nx: int, ny: int | None = None) -> "GridSpec":
        return cls("rectangle", L=float(L), nx=int(nx), ny=int(nx if ny is None else ny))

    @classmethod
    def annulus(cls, r: float, R: float, n_r: int, n_th: int) -> "GridSpec":
        return cls("annulus", r=float(r), R=float(R), n_r=int(n_r), n_th=int(n_th))

    def validate(self):
        if self.kind == "rectangle":
            if not self.L > 0:
                raise GridError(f"rectangle half-width must be positive, got {self.L}")
            if self.nx < 4 or self.ny < 4:
                raise GridError(f"rectangle needs nx, ny >= 4, got {self.nx}x{self.ny}")
        elif self.kind == "annulus":
            if not 0 < self.r < self.R:
                raise GridError(f"annulus needs 0 < r < R, got r={self.r}, R={self.R}")
            if self.n_r < 4:
                raise GridError(f"annulus needs n_r >= 4, got {self.n_r}")
            if self.n_th < 8 or self.n_th % 2:
                raise GridError(f"annulus needs an even n_th >= 8, got {self.n_th}")
        else:
            raise GridError(f"unknown domain kind {self.kind!r}")


@dataclass
class VelocityField:
    """Face-normal velocity components plus tangential wall values.

    On the annulus ``u`` is the radial and ``v`` the angular component.
    """

    u: np.ndarray
    v: np.ndarray
    wall: np.ndarray

    def copy(self) -> "VelocityField":
        return VelocityField(self.u.copy(), self.v.copy(), self.wall.copy())


@dataclass
class FlowState:
    velocity: VelocityField
    p: np.ndarray
    time: float = 0.0

    @property
    def u(self):
        return self.velocity.u

    @property
    def v(self):
        return self.velocity.v


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet velocity ``g(x, y, t)`` and body force ``f(x, y, t)``.

    Both return Cartesian component pairs; ``None`` means identically zero.
    """

    velocity: VectorFunction | None = None
    forcing: VectorFunction | None = None
    time_dependent: bool = True


def _as_velocity(obj) -> VelocityField:
    if isinstance(obj, FlowState):
        return obj.velocity
    if isinstance(obj, VelocityField):
        return obj
    raise GridError(f"expected a VelocityField or FlowState, got {type(obj).__name__}")


class StaggeredGrid:
    """Immutable MAC grid with its index maps, weights and operators."""

    def __init__(self, spec: GridSpec):
        spec.validate()
        self.spec = spec
        if spec.kind == "rectangle":
            self.polar, self.periodic = False, False
            self.n1, self.n2 = spec.nx, spec.ny
            self.xi0, self.xi1 = -spec.L, spec.L
            self.eta0, self.eta1 = -spec.L, spec.L
        else:
            self.polar, self.periodic = True, True
            self.n1, self.n2 = spec.n_r, spec.n_th
            self.xi0, self.xi1 = spec.r, spec.R
            self.eta0, self.eta1 = 0.0, 2.0 * math.pi
        n1, n2 = self.n1, self.n2
        self.d1 = (self.xi1 - self.xi0) / n1
        self.d2 = (self.eta1 - self.eta0) / n2
        self.nv2 = n2 if self.periodic else n2 + 1

        self.u_shape = (n1 + 1, n2)
        self.v_shape = (n1, self.nv2)
        self.p_shape = (n1, n2)
        self.n_u = (n1 + 1) * n2
        self.n_v = n1 * self.nv2
        self.n_tv = 2 * self.nv2
        self.n_tu = 0 if self.periodic else 2 * (n1 + 1)
        self.off_v = self.n_u
        self.off_tv = self.n_u + self.n_v
        self.off_tu = self.off_tv + self.n_tv
        self.n_faces = self.n_u + self.n_v
        self.n_full = self.off_tu + self.n_tu
        self.n_cells = n1 * n2

        # coordinates
        self.xi_nodes = self.xi0 + self.d1 * np.arange(n1 + 1)
        self.xi_centers = self.xi0 + self.d1 * (np.arange(n1) + 0.5)
        self.eta_nodes = self.eta0 + self.d2 * np.arange(self.nv2)
        self.eta_centers = self.eta0 + self.d2 * (np.arange(n2) + 0.5)

        free = np.zeros(self.n_full, dtype=bool)
        uf = np.zeros(self.u_shape, dtype=bool)
        uf[1:-1, :] = True
        vf = np.zeros(self.v_shape, dtype=bool)
        if self.periodic:
            vf[:, :] = True
        else:
            vf[:, 1:-1] = True
        free[: self.n_u] = uf.ravel()
        free[self.off_v : self.off_tv] = vf.ravel()
        self.free = np.flatnonzero(free)
        self.fixed = np.flatnonzero(~free)
        self.n_free = self.free.size

    # ------------------------------------------------------------------ layout
    def metric(self, xi):
        return np.asarray(xi, dtype=float) if self.polar else np.ones_like(np.asarray(xi, dtype=float))

    def uidx(self, i, j):
        if self.periodic:
            j = j % self.n2
        return i * self.n2 + j

    def vidx(self, i, j):
        if self.periodic:
            j = j % self.n2
        return self.off_v + i * self.nv2 + j

    def tvidx(self, side, j):
        return self.off_tv + side * self.nv2 + j

    def tuidx(self, side, i):
        return self.off_tu + side * (self.n1 + 1) + i

    def pack(self, vel) -> np.ndarray:
        vel = _as_velocity(vel)
        if vel.u.shape != self.u_shape or vel.v.shape != self.v_shape or vel.wall.size != self.n_tv + self.n_tu:
            raise GridError("velocity field does not match grid")
        return np.concatenate([vel.u.ravel(), vel.v.ravel(), vel.wall.ravel()])

    def unpack(self, vec: np.ndarray) -> VelocityField:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_full,):
            raise GridError(f"full vector must have length {self.n_full}, got {vec.shape}")
        return VelocityField(
            vec[: self.n_u].reshape(self.u_shape).copy(),
            vec[self.off_v : self.off_tv].reshape(self.v_shape).copy(),
            vec[self.off_tv :].copy(),
        )

    def zero_velocity(self) -> VelocityField:
        return self.unpack(np.zeros(self.n_full))

    def zero_state(self, time: float = 0.0) -> FlowState:
        return FlowState(self.zero_velocity(), np.zeros(self.p_shape), time)

    def check_cells(self, arr):
        if np.shape(arr) != self.p_shape:
            raise GridError(f"cell array must have shape {self.p_shape}, got {np.shape(arr)}")

    # ------------------------------------------------------------ geometry
    def to_cartesian(self, xi, eta):
        if self.polar:
            return xi * np.cos(eta), xi * np.sin(eta)
        return xi, eta

    def _frame(self, eta):
        """Unit vectors (e_xi, e_eta) in Cartesian components at angle ``eta``."""
        if self.polar:
            c, s = np.cos(eta), np.sin(eta)
            return (c, s), (-s, c)
        one, zero = np.ones_like(eta), np.zeros_like(eta)
        return (one, zero), (zero, one)

    @cached_property
    def _locations(self):
        """(xi, eta, component) for every full-vector entry; component 0 = xi, 1 = eta."""
        xi = np.empty(self.n_full)
        eta = np.empty(self.n_full)
        comp = np.empty(self.n_full, dtype=int)
        XI, ETA = np.meshgrid(self.xi_nodes, self.eta_centers, indexing="ij")
        xi[: self.n_u], eta[: self.n_u], comp[: self.n_u] = XI.ravel(), ETA.ravel(), 0
        XI, ETA = np.meshgrid(self.xi_centers, self.eta_nodes, indexing="ij")
        s = slice(self.off_v, self.off_tv)
        xi[s], eta[s], comp[s] = XI.ravel(), ETA.ravel(), 1
        for side, xw in enumerate((self.xi0, self.xi1)):
            s = slice(self.tvidx(side, 0), self.tvidx(side, 0) + self.nv2)
            xi[s], eta[s], comp[s] = xw, self.eta_nodes, 1
        if not self.periodic:
            for side, ew in enumerate((self.eta0, self.eta1)):
                s = slice(self.tuidx(side, 0), self.tuidx(side, 0) + self.n1 + 1)
                xi[s], eta[s], comp[s] = self.xi_nodes, ew, 0
        return xi, eta, comp

    def sample(self, func: VectorFunction | None, t: float, entries=None) -> np.ndarray:
        """Project a Cartesian vector function onto the full-vector locations."""
        if entries is None:
            entries = np.arange(self.n_full)
        out = np.zeros(self.n_full)
        if func is None or len(entries) == 0:
            return out
        xi, eta, comp = (a[entries] for a in self._locations)
        x, y = self.to_cartesian(xi, eta)
        fx, fy = func(x, y, t)
        fx = np.broadcast_to(np.asarray(fx, dtype=float), x.shape)
        fy = np.broadcast_to(np.asarray(fy, dtype=float), x.shape)
        (ax, ay), (bx, by) = self._frame(eta)
        out[entries] = np.where(comp == 0, fx * ax + fy * ay, fx * bx + fy * by)
        return out

    def sample_field(self, func: VectorFunction, t: float = 0.0) -> VelocityField:
        """Evaluate a vector function at every face and wall location."""
        return self.unpack(self.sample(func, t))

    def boundary_vector(self, boundary: BoundarySpec | None, t: float) -> np.ndarray:
        if boundary is None:
            return np.zeros(self.n_full)
        return self.sample(boundary.velocity, t, self.fixed)

    def forcing_vector(self, boundary: BoundarySpec | None, t: float) -> np.ndarray:
        if boundary is None or boundary.forcing is None:
            return np.zeros(self.n_full)
        return self.sample(boundary.forcing, t, np.arange(self.n_faces))

    def with_boundary(self, vel, boundary: BoundarySpec | None, t: float) -> VelocityField:
        vec = self.pack(vel)
        vec[self.fixed] = self.boundary_vector(boundary, t)[self.fixed]
        return self.unpack(vec)

    def boundary_flux(self, boundary: BoundarySpec | None, t: float) -> float:
        """Net outward flux of the Dirichlet data through the whole boundary."""
        g = self.boundary_vector(boundary, t)
        w = self.cell_weights.ravel()
        return float(w @ (self.D @ g))

    @property
    def boundary_length(self) -> float:
        if self.polar:
            return 2.0 * math.pi * (self.xi0 + self.xi1)
        return 2.0 * (self.xi1 - self.xi0) + 2.0 * (self.eta1 - self.eta0)

    def check_compatibility(self, boundary: BoundarySpec | None, t: float, rtol: float = 1e-12):
        flux = self.boundary_flux(boundary, t)
        g = self.boundary_vector(boundary, t)
        scale = max(1.0, float(np.max(np.abs(g)))) * self.boundary_length
        if abs(flux) > rtol * scale:
            raise GridError(f"Dirichlet data carry net flux {flux:.3e} at t={t}")
        return flux

    # ------------------------------------------------------------- weights
    @cached_property
    def face_weights(self) -> np.ndarray:
        """Quadrature weights of all full-vector entries (0 on wall entries)."""
        w = np.zeros(self.n_full)
        rho_u = self.metric(self.xi_nodes)
        wu = np.outer(rho_u * self.d1 * self.d2, np.ones(self.n2))
        wu[0, :] *= 0.5
        wu[-1, :] *= 0.5
        rho_v = self.metric(self.xi_centers)
        wv = np.outer(rho_v * self.d1 * self.d2, np.ones(self.nv2))
        if not self.periodic:
            wv[:, 0] *= 0.5
            wv[:, -1] *= 0.5
        w[: self.n_u] = wu.ravel()
        w[self.off_v : self.off_tv] = wv.ravel()
        return w

    @cached_property
    def cell_weights(self) -> np.ndarray:
        rho = self.metric(self.xi_centers)
        return np.outer(rho * self.d1 * self.d2, np.ones(self.n2))

    @cached_property
    def mass(self) -> np.ndarray:
        """Diagonal mass of the unknown faces."""
        return self.face_weights[self.free]

    # ----------------------------------------------------------- operators
    @cached_property
    def D(self) -> sp.csr_matrix:
        """Cell divergence acting on the full vector."""
        n1, n2, d1, d2 = self.n1, self.n2, self.d1, self.d2
        rows, cols, vals = [], [], []
        rho_f = self.metric(self.xi_nodes)
        rho_c = self.metric(self.xi_centers)
        for i in range(n1):
            area = rho_c[i] * d1 * d2
            for j in range(n2):
                r = i * n2 + j
                rows += [r, r, r, r]
                cols += [self.uidx(i + 1, j), self.uidx(i, j), self.vidx(i, j + 1), self.vidx(i, j)]
                vals += [rho_f[i + 1] * d2 / area, -rho_f[i] * d2 / area, d1 / area, -d1 / area]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_cells, self.n_full))

    @cached_property
    def _curl(self):
        """Node vorticity operator and node dual-cell areas."""
        n1, n2, d1, d2 = self.n1, self.n2, self.d1, self.d2
        rows, cols, vals = [], [], []
        areas = np.empty((n1 + 1) * self.nv2)
        for i in range(n1 + 1):
            lo = self.xi_nodes[i] - d1 / 2 if i > 0 else self.xi0
            hi = self.xi_nodes[i] + d1 / 2 if i < n1 else self.xi1
            len1 = hi - lo
            for jn in range(self.nv2):
                if self.periodic:
                    len2 = d2
                    bottom, top = self.uidx(i, jn - 1), self.uidx(i, jn)
                else:
                    elo = self.eta_nodes[jn] - d2 / 2 if jn > 0 else self.eta0
                    ehi = self.eta_nodes[jn] + d2 / 2 if jn < n2 else self.eta1
                    len2 = ehi - elo
                    bottom = self.uidx(i, jn - 1) if jn > 0 else self.tuidx(0, i)
                    top = self.uidx(i, jn) if jn < n2 else self.tuidx(1, i)
                right = self.vidx(i, jn) if i < n1 else self.tvidx(1, jn)
                left = self.vidx(i - 1, jn) if i > 0 else self.tvidx(0, jn)
                area = float(self.metric(0.5 * (lo + hi))) * len1 * len2
                r = i * self.nv2 + jn
                areas[r] = area
                rows += [r, r, r, r]
                cols += [bottom, top, right, left]
                vals += [
                    len1 / area,
                    -len1 / area,
                    float(self.metric(hi)) * len2 / area,
                    -float(self.metric(lo)) * len2 / area,
                ]
        C = sp.csr_matrix((vals, (rows, cols)), shape=((n1 + 1) * self.nv2, self.n_full))
        return C, areas

    @property
    def C(self) -> sp.csr_matrix:
        return self._curl[0]

    @cached_property
    def K(self) -> sp.csr_matrix:
        """Symmetric viscous operator (``M (-Delta)``) on the full vector."""
        C, an = self._curl
        wc = self.cell_weights.ravel()
        K = C.T @ sp.diags(an) @ C + self.D.T @ sp.diags(wc) @ self.D
        return sp.csr_matrix(K)

    @cached_property
    def K_free(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.K[self.free][:, self.free])

    @cached_property
    def K_fixed(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.K[self.free][:, self.fixed])

    @cached_property
    def B(self) -> sp.csr_matrix:
        """Weighted divergence ``W_c D`` restricted to the unknown faces."""
        return sp.csr_matrix(sp.diags(self.cell_weights.ravel()) @ self.D[:, self.free])

    @cached_property
    def B_fixed(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(self.cell_weights.ravel()) @ self.D[:, self.fixed])

    def gradient(self, p: np.ndarray) -> VelocityField:
        """Discrete pressure gradient at the unknown faces (adjoint of -divergence)."""
        self.check_cells(p)
        vec = np.zeros(self.n_full)
        vec[self.free] = -(self.B.T @ p.ravel()) / self.mass
        return self.unpack(vec)

    # ----------------------------------------------------------- convection
    @cached_property
    def _advection_pairs(self):
        """Pairs ``(P_k, Q_k)`` with ``(a . grad) b = sum_k (P_k a) * (Q_k b)`` on faces."""
        n1, n2, d1, d2 = self.n1, self.n2, self.d1, self.d2
        nf, nF = self.n_faces, self.n_full
        terms = {name: ([], [], []) for name in ("P1", "Q1", "P2", "Q2", "P3", "Q3")}

        def add(name, row, col, val):
            r, c, v = terms[name]
            r.append(row)
            c.append(col)
            v.append(val)

        rho_f = self.metric(self.xi_nodes)
        rho_c = self.metric(self.xi_centers)
        c_lo = (-4.0 / 3.0, 1.0, 1.0 / 3.0)  # wall at -h/2, self, neighbour at +h
        c_hi = (-1.0 / 3.0, -1.0, 4.0 / 3.0)  # neighbour at -h, self, wall at +h/2

        # rows on interior u-faces
        for i in range(1, n1):
            for j in range(n2):
                row = self.uidx(i, j)
                add("P1", row, row, 1.0)
                add("Q1", row, self.uidx(i + 1, j), 0.5 / d1)
                add("Q1", row, self.uidx(i - 1, j), -0.5 / d1)
                vavg = [self.vidx(i - 1, j), self.vidx(i, j), self.vidx(i - 1, j + 1), self.vidx(i, j + 1)]
                for c in vavg:
                    add("P2", row, c, 0.25)
                s = 1.0 / (rho_f[i] * d2)
                if self.periodic or 0 < j < n2 - 1:
                    add("Q2", row, self.uidx(i, j + 1), 0.5 * s)
                    add("Q2", row, self.uidx(i, j - 1), -0.5 * s)
                elif j == 0:
                    for c, w in zip((self.tuidx(0, i), row, self.uidx(i, 1)), c_lo):
                        add("Q2", row, c, w * s)
                else:
                    for c, w in zip((self.uidx(i, j - 1), row, self.tuidx(1, i)), c_hi):
                        add("Q2", row, c, w * s)
                if self.polar:
                    for c in vavg:
                        add("P3", row, c, 0.25)
                        add("Q3", row, c, -0.25 / rho_f[i])

        # rows on interior v-faces
        jrange = range(n2) if self.periodic else range(1, n2)
        for i in range(n1):
            for j in jrange:
                row = self.vidx(i, j)
                uavg = [self.uidx(i, j - 1), self.uidx(i + 1, j - 1), self.uidx(i, j), self.uidx(i + 1, j)]
                for c in uavg:
                    add("P1", row, c, 0.25)
                if 0 < i < n1 - 1:
                    add("Q1", row, self.vidx(i + 1, j), 0.5 / d1)
                    add("Q1", row, self.vidx(i - 1, j), -0.5 / d1)
                elif i == 0:
                    for c, w in zip((self.tvidx(0, j), row, self.vidx(1, j)), c_lo):
                        add("Q1", row, c, w / d1)
                else:
                    for c, w in zip((self.vidx(i - 1, j), row, self.tvidx(1, j)), c_hi):
                        add("Q1", row, c, w / d1)
                add("P2", row, row, 1.0)
                s = 1.0 / (rho_c[i] * d2)
                add("Q2", row, self.vidx(i, j + 1), 0.5 * s)
                add("Q2", row, self.vidx(i, j - 1), -0.5 * s)
                if self.polar:
                    add("P3", row, row, 1.0)
                    for c in uavg:
                        add("Q3", row, c, 0.25 / rho_c[i])

        def mat(name):
            r, c, v = terms[name]
            return sp.csr_matrix((v, (r, c)), shape=(nf, nF))

        pairs = [(mat("P1"), mat("Q1")), (mat("P2"), mat("Q2"))]
        if self.polar:
            pairs.append((mat("P3"), mat("Q3")))
        return pairs

    def advect_vector(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``(a . grad) b`` on all faces (zero on boundary faces) from full vectors."""
        out = np.zeros(self.n_faces)
        for P, Q in self._advection_pairs:
            out += (P @ a) * (Q @ b)
        return out

    def advection_jacobians(self, a: np.ndarray, b: np.ndarray):
        """Sparse ``d/db (a.grad)b`` and ``d/da (a.grad)b`` (faces x full)."""
        Jb = None
        Ja = None
        for P, Q in self._advection_pairs:
            tb = sp.diags(P @ a) @ Q
            ta = sp.diags(Q @ b) @ P
            Jb = tb if Jb is None else Jb + tb
            Ja = ta if Ja is None else Ja + ta
        return sp.csr_matrix(Jb), sp.csr_matrix(Ja)

    # ------------------------------------------------------ stream function
    @cached_property
    def stream_basis(self) -> sp.csr_matrix:
        """Columns span the discretely divergence-free fields with zero wall data.

        Interior node stream function values map to face velocities; on
        the annulus one extra column carries the net circulation.
        """
        n1, d1, d2 = self.n1, self.d1, self.d2
        nodes = []
        for i in range(1, n1):
            for jn in range(self.nv2):
                if not self.periodic and (jn == 0 or jn == self.n2):
                    continue
                nodes.append((i, jn))
        col_of = {nd: k for k, nd in enumerate(nodes)}
        ncols = len(nodes) + (1 if self.periodic else 0)
        inner_col = len(nodes) if self.periodic else None
        rho_f = self.metric(self.xi_nodes)

        def psi_col(i, jn):
            if self.periodic:
                jn %= self.n2
            if (i, jn) in col_of:
                return col_of[(i, jn)]
            if self.periodic and i == 0:
                return inner_col
            return None

        rows, cols, vals = [], [], []
        for i in range(1, n1):
            for j in range(self.n2):
                # u = (1/rho) d(psi)/d(eta)
                row = self.uidx(i, j)
                for (ii, jj), sgn in (((i, j + 1), 1.0), ((i, j), -1.0)):
                    c = psi_col(ii, jj)
                    if c is not None:
                        rows.append(row)
                        cols.append(c)
                        vals.append(sgn / (rho_f[i] * d2))
        jrange = range(self.n2) if self.periodic else range(1, self.n2)
        for i in range(n1):
            for j in jrange:
                # v = -d(psi)/d(xi)
                row = self.vidx(i, j)
                for (ii, jj), sgn in (((i + 1, j), -1.0), ((i, j), 1.0)):
                    c = psi_col(ii, jj)
                    if c is not None:
                        rows.append(row)
                        cols.append(c)
                        vals.append(sgn / d1)
        S = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_full, ncols))
        return sp.csr_matrix(S[self.free])


def build_grid(spec: GridSpec) -> StaggeredGrid:
    return StaggeredGrid(spec)


# ------------------------------------------------------------------ operators
def divergence(state, grid: StaggeredGrid) -> np.ndarray:
    """Cell-centred discrete divergence."""
    vec = grid.pack(_as_velocity(state))
    return (grid.D @ vec).reshape(grid.p_shape)


def _face_vector_to_field(grid, faces):
    vec = np.zeros(grid.n_full)
    vec[: grid.n_faces] = faces
    return grid.unpack(vec)


def advect(a, b, grid: StaggeredGrid) -> VelocityField:
    """Centred convective term ``(a . grad) b`` at the interior velocity faces."""
    av, bv = grid.pack(_as_velocity(a)), grid.pack(_as_velocity(b))
    return _face_vector_to_field(grid, grid.advect_vector(av, bv))


def laplacian(b, grid: StaggeredGrid, nu: float) -> VelocityField:
    """``-nu * Delta b`` at the interior faces (zero elsewhere)."""
    vec = grid.pack(_as_velocity(b))
    out = np.zeros(grid.n_full)
    out[grid.free] = nu * (grid.K[grid.free] @ vec) / grid.mass
    return grid.unpack(out)


def norm_l2(field, grid: StaggeredGrid) -> float:
    """Quadrature-weighted discrete L2 norm of a cell array, face array or velocity."""
    if isinstance(field, (VelocityField, FlowState)):
        vel = _as_velocity(field)
        return math.sqrt(norm_l2(vel.u, grid) ** 2 + norm_l2(vel.v, grid) ** 2)
    arr = np.asarray(field, dtype=float)
    fw = grid.face_weights
    if arr.shape == grid.u_shape:
        w = fw[: grid.n_u].reshape(grid.u_shape)
    elif arr.shape == grid.p_shape:
        w = grid.cell_weights
    elif arr.shape == grid.v_shape:
        w = fw[grid.off_v : grid.off_tv].reshape(grid.v_shape)
    else:
        raise GridError(f"array shape {arr.shape} matches no grid location")
    return float(np.sqrt(np.sum(w * arr * arr)))


def cell_centered_velocity(vel, grid: StaggeredGrid):
    """Cartesian velocity components averaged to cell centres."""
    vel = _as_velocity(vel)
    uc = 0.5 * (vel.u[:-1, :] + vel.u[1:, :])
    if grid.periodic:
        vc = 0.5 * (vel.v + np.roll(vel.v, -1, axis=1))
    else:
        vc = 0.5 * (vel.v[:, :-1] + vel.v[:, 1:])
    if grid.polar:
        eta = grid.eta_centers[None, :]
        return uc * np.cos(eta) - vc * np.sin(eta), uc * np.sin(eta) + vc * np.cos(eta)
    return uc, vc


def export_csv(state: FlowState, grid: StaggeredGrid, path) -> None:
    """Write ``x, y, u, v, p`` rows at cell centres (Cartesian components)."""
    ux, uy = cell_centered_velocity(state.velocity, grid)
    XI, ETA = np.meshgrid(grid.xi_centers, grid.eta_centers, indexing="ij")
    x, y = grid.to_cartesian(XI, ETA)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u", "v", "p"])
        for row in zip(x.ravel(), y.ravel(), ux.ravel(), uy.ravel(), state.p.ravel()):
            w.writerow([repr(float(c)) for c in row])
