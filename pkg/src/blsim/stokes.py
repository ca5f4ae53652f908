"""Stokes / Brinkman velocity solves on the MAC grid.

The momentum equation -nu*Lap(v) + H v + grad p = f, div v = 0, v = b on the
boundary, is discretized with the usual staggered five-point stencils.  Wall
tangential velocities enter through the half-cell distance between the wall
and the first row of faces (equivalent to the ghost value 2*b_t - v).

Internally everything is written as one quadratic form over the vector Z of
all face values plus the tangential wall values.  Two solution strategies are
available:

``nullspace`` (default)
    Write the interior faces as the discrete curl of a node stream function
    plus a particular field built from the boundary fluxes.  The divergence of
    the result is zero up to round-off, and the reduced operator C^T A C is
    symmetric positive definite.  A sparse LU factor of it is cached and reused
    as a preconditioner for conjugate gradients while the damping changes
    slowly, and it is refreshed when the iteration count grows.

``uzawa``
    Conjugate gradients (or a fixed-step Uzawa iteration) on the pressure
    Schur complement, with the velocity blocks factorized and a
    ``nu*I + H*(-Lap_N)^-1`` preconditioner.

Pressure is recovered from the momentum residual by a Neumann Poisson solve
and gauge-fixed to zero mean.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DataError, DomainError, SolverError
from .grid import BoundarySnapshot, StaggeredGrid, VelocityField, net_flux

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 500
    tolerance: float = 1e-10
    uzawa_step: float | str = "auto"
    method: str = "nullspace"
    refactor_iterations: int = 8

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("solver.tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError("solver.max_iterations must be a positive integer")
        if self.method not in ("nullspace", "uzawa"):
            raise DomainError(f"unknown solver.method {self.method!r}")
        if self.uzawa_step != "auto" and not float(self.uzawa_step) > 0:
            raise DomainError("solver.uzawa_step must be positive or 'auto'")


def _splu(a):
    return splu(sp.csc_matrix(a), permc_spec="MMD_AT_PLUS_A",
                options=dict(SymmetricMode=True))


def _pcg(matvec, b, precond, x0, tol, maxit):
    """Preconditioned CG; returns (x, iterations, relative residual history)."""
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return np.zeros_like(b), 0, [0.0]
    r = b - matvec(x) if x0 is not None else b.copy()
    hist = [np.linalg.norm(r) / bnorm]
    if hist[-1] <= tol:
        return x, 0, hist
    z = precond(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        q = matvec(p)
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        hist.append(np.linalg.norm(r) / bnorm)
        if hist[-1] <= tol:
            return x, it, hist
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxit, hist


class MACOperators:
    """Index maps and sparse matrices for one grid (independent of nu and h)."""

    def __init__(self, grid: StaggeredGrid):
        self.grid = g = grid
        nx, ny, dx, dy = g.nx, g.ny, g.dx, g.dy
        self.NX = ny * (nx + 1)
        self.NF = self.NX + (ny + 1) * nx
        self.NW = 2 * (nx - 1) + 2 * (ny - 1)
        self.NZ = self.NF + self.NW
        fx = np.arange(self.NX).reshape(ny, nx + 1)
        fy = self.NX + np.arange((ny + 1) * nx).reshape(ny + 1, nx)
        w0 = self.NF
        wb = w0 + np.arange(nx - 1)
        wt = wb + (nx - 1)
        wl = w0 + 2 * (nx - 1) + np.arange(ny - 1)
        wr = wl + (ny - 1)
        self.fx, self.fy = fx, fy

        interior = np.zeros(self.NZ, dtype=bool)
        interior[fx[:, 1:-1].ravel()] = True
        interior[fy[1:-1, :].ravel()] = True
        self.I = np.flatnonzero(interior)
        self.K = np.flatnonzero(~interior)
        self.bface_index = np.concatenate([fx[:, 0], fx[:, -1], fy[0, :], fy[-1, :]])
        self.wall_index = np.concatenate([wb, wt, wl, wr])

        # edges of the discrete Dirichlet form: (a, b, weight)
        ea, eb, ec = [], [], []

        def add(a, b, c):
            a, b = np.ravel(a), np.ravel(b)
            ea.append(a)
            eb.append(b)
            ec.append(np.full(a.size, c))

        add(fx[:, :-1], fx[:, 1:], dy / dx)
        add(fx[:-1, 1:-1], fx[1:, 1:-1], dx / dy)
        add(fx[0, 1:-1], wb, 2 * dx / dy)
        add(fx[-1, 1:-1], wt, 2 * dx / dy)
        add(fy[:-1, :], fy[1:, :], dx / dy)
        add(fy[1:-1, :-1], fy[1:-1, 1:], dy / dx)
        add(fy[1:-1, 0], wl, 2 * dy / dx)
        add(fy[1:-1, -1], wr, 2 * dy / dx)
        ea, eb, ec = np.concatenate(ea), np.concatenate(eb), np.concatenate(ec)
        keep = interior[ea] | interior[eb]
        ea, eb, ec = ea[keep], eb[keep], ec[keep]
        ne = ea.size
        rows = np.concatenate([np.arange(ne), np.arange(ne)])
        self.E = sp.csr_matrix((np.concatenate([np.ones(ne), -np.ones(ne)]),
                                (rows, np.concatenate([ea, eb]))), shape=(ne, self.NZ))
        self.edge_w = ec
        L = (self.E.T @ sp.diags(ec) @ self.E).tocsr()
        self.L_II = L[self.I][:, self.I].tocsr()
        self.L_IK = L[self.I][:, self.K].tocsr()
        self.L_KZ = L[self.K].tocsr()

        # node stream function -> faces
        nn = (ny + 1) * (nx + 1)
        node = np.arange(nn).reshape(ny + 1, nx + 1)
        r = np.concatenate([fx.ravel(), fx.ravel(), fy.ravel(), fy.ravel()])
        c = np.concatenate([node[1:, :].ravel(), node[:-1, :].ravel(),
                            node[:, 1:].ravel(), node[:, :-1].ravel()])
        v = np.concatenate([np.full(fx.size, 1 / dy), np.full(fx.size, -1 / dy),
                            np.full(fy.size, -1 / dx), np.full(fy.size, 1 / dx)])
        C = sp.csr_matrix((v, (r, c)), shape=(self.NF, nn))
        inner_node = np.zeros((ny + 1, nx + 1), dtype=bool)
        inner_node[1:-1, 1:-1] = True
        self.node_in = np.flatnonzero(inner_node.ravel())
        self.node_bd = np.flatnonzero(~inner_node.ravel())
        CI = C[self.I]
        self.C_I = CI[:, self.node_in].tocsr()
        self.C_Ib = CI[:, self.node_bd].tocsr()
        self.C_Kb = C[self.bface_index][:, self.node_bd].tocsr()

        # divergence (cells x faces)
        cell = np.arange(nx * ny).reshape(ny, nx)
        r = np.concatenate([cell.ravel()] * 4)
        c = np.concatenate([fx[:, 1:].ravel(), fx[:, :-1].ravel(), fy[1:, :].ravel(), fy[:-1, :].ravel()])
        v = np.concatenate([np.full(cell.size, 1 / dx), np.full(cell.size, -1 / dx),
                            np.full(cell.size, 1 / dy), np.full(cell.size, -1 / dy)])
        Bf = sp.csr_matrix((v, (r, c)), shape=(nx * ny, self.NZ))
        self.B = Bf[:, :self.NF].tocsr()
        self.B_I = Bf[:, self.I].tocsr()
        self.B_K = Bf[:, self.K].tocsr()
        P = (self.B_I @ self.B_I.T).tolil()
        P[0, 0] += 1.0 / (dx * dy)
        self._poisson = _splu(P.tocsc())
        self._riesz = None

        # interior-face averaging of cell values
        self.is_x_int = np.zeros(self.I.size, dtype=bool)
        self.is_x_int[: ny * (nx - 1)] = True
        self.area = dx * dy
        self.face_w = np.full(self.NF, dx * dy)
        self.face_w[self.bface_index] *= 0.5

    # --- packing helpers -------------------------------------------------
    def cell_to_interior_faces(self, h):
        h = np.asarray(h, dtype=float)
        hx = 0.5 * (h[:, 1:] + h[:, :-1])
        hy = 0.5 * (h[1:, :] + h[:-1, :])
        return np.concatenate([hx.ravel(), hy.ravel()])

    def faces_to_interior(self, vx, vy):
        return np.concatenate([vx[:, 1:-1].ravel(), vy[1:-1, :].ravel()])

    def assemble_faces(self, zI, zK):
        z = np.empty(self.NZ)
        z[self.I] = zI
        z[self.K] = zK
        return z

    def split_faces(self, z):
        g = self.grid
        vx = z[: self.NX].reshape(g.ny, g.nx + 1).copy()
        vy = z[self.NX: self.NF].reshape(g.ny + 1, g.nx).copy()
        return vx, vy

    def to_z(self, v: VelocityField, wall=None):
        z = np.zeros(self.NZ)
        z[: self.NX] = v.vx.ravel()
        z[self.NX: self.NF] = v.vy.ravel()
        if wall is not None:
            z[self.wall_index] = wall
        return z

    # --- boundary data ----------------------------------------------------
    def boundary_stream(self, b_n):
        """Stream function on boundary nodes reproducing the normal fluxes."""
        g = self.grid
        nx, ny = g.nx, g.ny
        b_n = np.asarray(b_n, dtype=float)
        b_n = b_n - net_flux(g, b_n) / g.perimeter
        left, right = b_n[g.side_slice("left")], b_n[g.side_slice("right")]
        bottom, top = b_n[g.side_slice("bottom")], b_n[g.side_slice("top")]
        psi = np.zeros((ny + 1, nx + 1))
        psi[0, 1:] = np.cumsum(g.dx * bottom)
        psi[1:, nx] = psi[0, nx] + np.cumsum(g.dy * right)
        psi[ny, :nx] = psi[ny, nx] + np.cumsum((g.dx * top)[::-1])[::-1]
        psi[1:ny, 0] = psi[ny, 0] + np.cumsum((g.dy * left)[::-1])[::-1][1:]
        return psi.ravel()[self.node_bd]

    def wall_values(self, b_t):
        """Tangential wall velocity at the interior boundary nodes."""
        g = self.grid
        b_t = np.asarray(b_t, dtype=float)
        out = []
        for side in ("bottom", "top", "left", "right"):
            s = b_t[g.side_slice(side)]
            out.append(0.5 * (s[1:] + s[:-1]))
        return np.concatenate(out)

    def known_values(self, bsnap: BoundarySnapshot):
        psi_b = self.boundary_stream(bsnap.b_n)
        zK_full = np.zeros(self.NZ)
        zK_full[self.bface_index] = self.C_Kb @ psi_b
        zK_full[self.wall_index] = self.wall_values(bsnap.b_t)
        return psi_b, zK_full[self.K]

    # --- norms ------------------------------------------------------------
    def grad_sq(self, z):
        e = self.E @ z
        return float(e @ (self.edge_w * e))

    def l2_sq(self, z):
        return float(np.sum(self.face_w * z[: self.NF] ** 2))

    def riesz_dual_sq(self, dI):
        """Squared H^-1 norm of an interior face field (zero wall values)."""
        if self.I.size == 0:
            return 0.0
        if self._riesz is None:
            self._riesz = _splu(self.L_II.tocsc())
        z = self._riesz.solve(self.area * dI)
        return float(self.area * dI @ z)

    def pressure_from_residual(self, r):
        rhs = self.B_I @ r / self.area
        p = self._poisson.solve(rhs)
        return p - p.mean()


_OPS_CACHE: dict = {}


def mac_operators(grid: StaggeredGrid) -> MACOperators:
    ops = _OPS_CACHE.get(grid)
    if ops is None:
        if len(_OPS_CACHE) > 8:
            _OPS_CACHE.clear()
        ops = _OPS_CACHE[grid] = MACOperators(grid)
    return ops


@dataclass
class SolveInfo:
    iterations: int = 0
    momentum_residual: float = 0.0
    div_residual: float = 0.0
    trace: list = field(default_factory=list)
    refactored: bool = False


class BrinkmanSolver:
    """Reusable solver for one grid and viscosity.

    ``solve`` handles -nu*Lap(v) + H v + grad p = f with face damping H >= 0.
    Keeping one instance alive across time steps lets the factorization be
    reused as a preconditioner.
    """

    def __init__(self, grid: StaggeredGrid, nu: float, settings: SolverSettings | None = None):
        if not nu > 0:
            raise DomainError("nu must be positive")
        self.grid = grid
        self.nu = float(nu)
        self.settings = settings or SolverSettings()
        self.ops = mac_operators(grid)
        self._factor = None
        self._H_ref = None
        self._needs_refactor = False
        self._uzawa_cache = None
        self._psi_prev = None
        self.info = SolveInfo()

    # --- reduced operator ---------------------------------------------------
    def _factorize(self, HI):
        ops = self.ops
        A = self.nu * ops.L_II + sp.diags(ops.area * HI)
        S = (ops.C_I.T @ A @ ops.C_I).tocsc()
        self._factor = _splu(S)
        self._H_ref = HI.copy()
        self._needs_refactor = False

    def _want_refactor(self, HI):
        if self._factor is None or self._needs_refactor:
            return True
        ref = self._H_ref
        scale = np.maximum(ref, 0.0) + self.nu / min(self.grid.dx, self.grid.dy) ** 2 * 1e-3
        return bool(np.max(np.abs(HI - ref) / scale) > 0.5)

    def solve(self, HI, bsnap: BoundarySnapshot, forcing_I=None, x0=None,
              compute_pressure=True, trace=False):
        """Solve with interior-face damping HI; returns (VelocityField, wall values)."""
        if self.settings.method == "uzawa":
            return self._solve_uzawa(HI, bsnap, forcing_I, x0, trace)
        ops = self.ops
        tol = self.settings.tolerance
        psi_b, zK = ops.known_values(bsnap)
        aHI = ops.area * HI
        base = ops.C_Ib @ psi_b
        rhs_I = -(self.nu * (ops.L_II @ base) + aHI * base + self.nu * (ops.L_IK @ zK))
        if forcing_I is not None:
            rhs_I += ops.area * forcing_I
        rhs = ops.C_I.T @ rhs_I
        info = SolveInfo()
        if ops.node_in.size:
            refactored = False
            if self._want_refactor(HI):
                self._factorize(HI)
                refactored = True

            def matvec(x):
                y = ops.C_I @ x
                return ops.C_I.T @ (self.nu * (ops.L_II @ y) + aHI * y)

            if x0 is None:
                x0 = self._factor.solve(rhs)
            psi, its, hist = _pcg(matvec, rhs, self._factor.solve, x0, tol, self.settings.max_iterations)
            if hist[-1] > tol and not refactored:
                self._factorize(HI)
                refactored = True
                psi, its2, hist2 = _pcg(matvec, rhs, self._factor.solve, self._factor.solve(rhs),
                                        tol, self.settings.max_iterations)
                its += its2
                hist += hist2
            if hist[-1] > tol:
                raise SolverError("stream-function solve did not converge", hist[-1], its)
            if its > self.settings.refactor_iterations:
                self._needs_refactor = True
            info.iterations = its
            info.refactored = refactored
            if trace:
                info.trace = [(k, h, 0.0) for k, h in enumerate(hist)]
            vI = ops.C_I @ psi + base
        else:
            vI = base
        z = ops.assemble_faces(vI, zK)
        vx, vy = ops.split_faces(z)
        p = None
        if compute_pressure:
            r = self.nu * (ops.L_II @ vI + ops.L_IK @ zK) + aHI * vI
            if forcing_I is not None:
                r -= ops.area * forcing_I
            p = ops.pressure_from_residual(r)
            res = r - ops.area * (ops.B_I.T @ p.ravel())
            info.momentum_residual = float(np.sqrt(np.sum(res**2) / ops.area))
            p = p.reshape(self.grid.shape)
        div = ops.B @ z[: ops.NF]
        info.div_residual = float(np.max(np.abs(div))) if div.size else 0.0
        self.info = info
        return VelocityField(vx, vy, p), z[ops.wall_index]

    # --- Uzawa ----------------------------------------------------------------
    def _solve_uzawa(self, HI, bsnap, forcing_I, x0, trace):
        ops = self.ops
        st = self.settings
        _, zK = ops.known_values(bsnap)
        key = HI.tobytes()
        if self._uzawa_cache is None or self._uzawa_cache[0] != key:
            A = (self.nu * ops.L_II + sp.diags(ops.area * HI)).tocsc()
            self._uzawa_cache = (key, _splu(A))
        Asolve = self._uzawa_cache[1].solve
        bI = -self.nu * (ops.L_IK @ zK)
        if forcing_I is not None:
            bI = bI + ops.area * forcing_I
        g = -(ops.B_K @ zK)
        a = ops.area
        hbar = float(np.mean(HI)) if HI.size else 0.0

        def velocity(p):
            return Asolve(bI + a * (ops.B_I.T @ p))

        def schur(p):
            return a * (ops.B_I @ Asolve(ops.B_I.T @ p))

        def precond(r):
            r = r - r.mean()
            z = self.nu * r + hbar * ops._poisson.solve(r) * 1.0
            return z - z.mean()

        rhs = g - ops.B_I @ Asolve(bI)
        rhs = rhs - rhs.mean()
        p0 = np.zeros(rhs.size) if x0 is None or x0.p is None else x0.p.ravel() - x0.p.mean()
        hist = []
        if st.uzawa_step == "auto":
            # stop on the absolute discrete L2 divergence
            scale = np.linalg.norm(rhs) * np.sqrt(a)
            rel = st.tolerance / max(scale, st.tolerance)

            def matvec(q):
                y = schur(q)
                return y - y.mean()

            p, its, hist = _pcg(matvec, rhs, precond, p0, rel, st.max_iterations)
            hist = [h * scale for h in hist]
        else:
            omega = float(st.uzawa_step)
            p = p0.copy()
            rn = np.linalg.norm(rhs) or 1.0
            its = 0
            for its in range(1, st.max_iterations + 1):
                res = ops.B_I @ velocity(p) - g
                res -= res.mean()
                hist.append(np.linalg.norm(res) / rn)
                if hist[-1] <= st.tolerance:
                    break
                p = p - omega * res
        if hist and hist[-1] > st.tolerance:
            raise SolverError("Uzawa iteration did not converge", hist[-1], its)
        vI = velocity(p)
        z = ops.assemble_faces(vI, zK)
        vx, vy = ops.split_faces(z)
        r = self.nu * (ops.L_II @ vI + ops.L_IK @ zK) + ops.area * HI * vI
        if forcing_I is not None:
            r -= ops.area * forcing_I
        res = r - a * (ops.B_I.T @ p)
        info = SolveInfo(iterations=its)
        info.momentum_residual = float(np.sqrt(np.sum(res**2) / a))
        info.div_residual = float(np.max(np.abs(ops.B @ z[: ops.NF])))
        if trace:
            info.trace = [(k, 0.0, h) for k, h in enumerate(hist)]
        self.info = info
        p = (p - p.mean()).reshape(self.grid.shape)
        return VelocityField(vx, vy, p), z[ops.wall_index]

    # --- energy -----------------------------------------------------------------
    def energy_balance(self, v: VelocityField, wall, HI, forcing_I=None):
        """(nu*|grad v|^2 + sum H v^2 area, boundary work) for a solved field."""
        ops = self.ops
        z = ops.to_z(v, wall)
        zI = z[ops.I]
        dissipation = self.nu * ops.grad_sq(z) + float(np.sum(ops.area * HI * zI**2))
        zK = z[ops.K]
        work = self.nu * float(zK @ (ops.L_KZ @ z))
        work -= ops.area * float(v.p.ravel() @ (ops.B_K @ zK))
        if forcing_I is not None:
            work += ops.area * float(forcing_I @ zI)
        return dissipation, work


# ---------------------------------------------------------------- functions

def _check_compatible(grid, bsnap):
    flux = abs(net_flux(grid, bsnap.b_n))
    if flux > 1e-10 * grid.perimeter:
        raise DataError(f"boundary normal velocity has net flux {flux:.3e}")


def _cell_damping(grid, h_field):
    h = np.broadcast_to(np.asarray(h_field, dtype=float), grid.shape)
    if np.any(~np.isfinite(h)) or np.any(h <= 0):
        raise DomainError("damping field must be positive")
    return mac_operators(grid).cell_to_interior_faces(h)


def boundary_norm(grid: StaggeredGrid, bsnap: BoundarySnapshot) -> float:
    """||b||_{L2(boundary)} + discrete H1 seminorm of b along the boundary."""
    order = np.concatenate([
        np.arange(grid.n_bfaces)[grid.side_slice("bottom")],
        np.arange(grid.n_bfaces)[grid.side_slice("right")],
        np.arange(grid.n_bfaces)[grid.side_slice("top")][::-1],
        np.arange(grid.n_bfaces)[grid.side_slice("left")][::-1]])
    ln = grid.bface_length[order]
    l2 = 0.0
    h1 = 0.0
    for comp in (bsnap.b_n, bsnap.b_t):
        c = np.asarray(comp)[order]
        l2 += float(np.sum(ln * c * c))
        d = np.diff(np.append(c, c[0]))
        h = 0.5 * (ln + np.roll(ln, -1))
        h1 += float(np.sum(d * d / h))
    return float(np.sqrt(l2) + np.sqrt(h1))


def velocity_norms(grid: StaggeredGrid, v: VelocityField, wall=None):
    """(L2 norm, H1 seminorm) of a face field with tangential wall values."""
    ops = mac_operators(grid)
    z = ops.to_z(v, wall)
    return float(np.sqrt(ops.l2_sq(z))), float(np.sqrt(ops.grad_sq(z)))


def solve_lifting(grid: StaggeredGrid, b: BoundarySnapshot, nu: float,
                  settings: SolverSettings | None = None):
    """Stokes extension of boundary data; returns (field, ||v||_V1 / ||b||)."""
    _check_compatible(grid, b)
    solver = BrinkmanSolver(grid, nu, settings)
    HI = np.zeros(solver.ops.I.size)
    v, wall = solver.solve(HI, b)
    l2, h1 = velocity_norms(grid, v, wall)
    bn = boundary_norm(grid, b)
    ratio = float(np.hypot(l2, h1) / bn) if bn > 0 else 0.0
    return v, ratio


def solve_quasi_stationary(grid: StaggeredGrid, h_field, b: BoundarySnapshot, nu: float,
                           forcing: VelocityField | None = None,
                           settings: SolverSettings | None = None) -> VelocityField:
    _check_compatible(grid, b)
    HI = _cell_damping(grid, h_field)
    solver = BrinkmanSolver(grid, nu, settings)
    fI = None if forcing is None else solver.ops.faces_to_interior(forcing.vx, forcing.vy)
    v, _ = solver.solve(HI, b, fI)
    return v


def solve_B_tau(grid: StaggeredGrid, h_field, b: BoundarySnapshot, nu: float,
                settings: SolverSettings | None = None) -> VelocityField:
    """Quasi-stationary Brinkman field for the saturation of a tau-run."""
    return solve_quasi_stationary(grid, h_field, b, nu, None, settings)


def step_unsteady(v_prev: VelocityField, grid: StaggeredGrid, h_field, b: BoundarySnapshot,
                  nu: float, tau: float, dt: float,
                  settings: SolverSettings | None = None) -> VelocityField:
    """One implicit Euler step of tau*dv/dt - nu*Lap(v) + h v + grad p = 0."""
    if not (tau > 0 and dt > 0):
        raise DomainError("step_unsteady needs tau > 0 and dt > 0")
    _check_compatible(grid, b)
    HI = _cell_damping(grid, h_field) + tau / dt
    solver = BrinkmanSolver(grid, nu, settings)
    fI = (tau / dt) * solver.ops.faces_to_interior(v_prev.vx, v_prev.vy)
    v, _ = solver.solve(HI, b, fI)
    return v


# ---------------------------------------------------------------- verification

def stream_field(grid: StaggeredGrid):
    """Faces of w = curl(sin(pi x) sin(pi y)/pi) on the unit square, plus its trace."""
    Xx, Yx = grid.xface_centers()
    Xy, Yy = grid.yface_centers()
    vx = np.sin(np.pi * Xx) * np.cos(np.pi * Yx)
    vy = -np.cos(np.pi * Xy) * np.sin(np.pi * Yy)
    c = grid.bface_center
    x, y = c[:, 0], c[:, 1]
    wx = np.sin(np.pi * x) * np.cos(np.pi * y)
    wy = -np.cos(np.pi * x) * np.sin(np.pi * y)
    n = grid.bface_normal
    b_n = wx * n[:, 0] + wy * n[:, 1]
    b_t = np.where(n[:, 0] != 0, wy, wx)
    return VelocityField(vx, vy), BoundarySnapshot(0.0, np.zeros(grid.n_bfaces), b_n, b_t)


def manufactured_forcing(grid: StaggeredGrid, nu: float, h: float = 1.0):
    """Forcing (2 pi^2 nu + h) w + grad p* with p* = cos(pi x) cos(pi y)."""
    w, _ = stream_field(grid)
    Xx, Yx = grid.xface_centers()
    Xy, Yy = grid.yface_centers()
    px = -np.pi * np.sin(np.pi * Xx) * np.cos(np.pi * Yx)
    py = -np.pi * np.cos(np.pi * Xy) * np.sin(np.pi * Yy)
    k = 2 * np.pi**2 * nu + h
    return VelocityField(k * w.vx + px, k * w.vy + py)


def mms_errors(nxs, nu: float = 0.1, settings: SolverSettings | None = None):
    """Face L2 errors of the manufactured Brinkman problem (h = 1) per grid."""
    errs = []
    for nx in nxs:
        grid = StaggeredGrid(nx, nx)
        w, b = stream_field(grid)
        f = manufactured_forcing(grid, nu)
        v = solve_quasi_stationary(grid, np.ones(grid.shape), b, nu, f, settings)
        ops = mac_operators(grid)
        d = ops.to_z(VelocityField(v.vx - w.vx, v.vy - w.vy))
        errs.append(float(np.sqrt(ops.l2_sq(d))))
    return np.array(errs)


def observed_rates(hs, errs):
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    return np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
