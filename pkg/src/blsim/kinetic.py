"""Kinetic-formulation diagnostics computed from discrete trajectories.

f(t, x, v) = sgn+(u - v) is sampled on a v-grid.  Defect measures m+ and m-
come from the scheme's own entropy fluxes: for a level k the one-sided
entropy flux of a face is F(u v k) - F(k) (or F(k) - F(u ^ k)), where F is
the transport flux including diffusion and boundary exchange.  For a
monotone scheme that makes m+/- >= 0 hold cell by cell up to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .grid import StaggeredGrid
from .model import FluxModel, sgn_plus
from .transport import TransportSettings, directional_fluxes, flux_divergence

M_TOL = 1e-10  # defect positivity tolerance relative to the scheme scale
WEAK_TOL_CONSTANT = 0.5  # tol_weak = C (dx + dt) (|Omega| + T |Gamma| K max|b_n|)
_GAUSS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------- v-grid and f

@dataclass(frozen=True, eq=False)
class VGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2 or np.any(np.diff(v) <= 0):
            raise DomainError("v-grid values must be strictly increasing")
        object.__setattr__(self, "values", v)

    @property
    def spacing(self) -> float:
        inner = self.values[(self.values >= 0) & (self.values <= 1)]
        d = np.diff(inner) if inner.size > 1 else np.diff(self.values)
        return float(d.max())

    @property
    def spans_unit(self) -> bool:
        return bool(self.values[0] < 0 and self.values[-1] > 1)

    def unit_weights(self):
        """Trapezoid weights of the points inside [0, 1] (zero elsewhere)."""
        v = self.values
        w = np.zeros(v.size)
        idx = np.flatnonzero((v >= 0) & (v <= 1))
        if idx.size > 1:
            d = np.diff(v[idx])
            w[idx[:-1]] += 0.5 * d
            w[idx[1:]] += 0.5 * d
        return w


def default_vgrid(n: int = 21, margin: float = 0.05) -> VGrid:
    return VGrid(np.concatenate([[-margin], np.linspace(0.0, 1.0, n), [1.0 + margin]]))


@dataclass(frozen=True, eq=False)
class KineticField:
    """f on (level, row, col, v); f0 is level 0, fb the boundary-adjacent cells."""

    vgrid: VGrid
    times: np.ndarray
    f: np.ndarray
    f0: np.ndarray
    fb: np.ndarray


def indicator(u, vvalues) -> np.ndarray:
    """sgn+(u - v) broadcast over a trailing v axis (0 at ties)."""
    return sgn_plus(np.asarray(u, dtype=float)[..., None] - np.asarray(vvalues, dtype=float))


def _boundary_cells(u, grid: StaggeredGrid):
    """Values of the first interior layer in boundary-face order."""
    return np.concatenate([u[:, 0], u[:, -1], u[0, :], u[-1, :]])


def build_kinetic(traj, vgrid: VGrid | None = None, dtype=np.float32) -> KineticField:
    vgrid = vgrid or default_vgrid()
    grid = traj.grid
    vv = vgrid.values
    u = np.stack([s.u for s in traj.states])
    f = indicator(u, vv).astype(dtype)
    fb = np.stack([indicator(_boundary_cells(s.u, grid), vv) for s in traj.states]).astype(dtype)
    return KineticField(vgrid, traj.times, f, f[0], fb)


# ---------------------------------------------------------------- certificates

@dataclass
class Certificate:
    rows: list = field(default_factory=list)  # (name, v, value, bound, passed, location)

    def add(self, name, v, value, bound, passed, location=""):
        self.rows.append((name, float(v), float(value), float(bound), bool(passed), str(location)))

    @property
    def passed(self) -> bool:
        return all(r[4] for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r[4]]

    def extend(self, other: "Certificate"):
        self.rows.extend(other.rows)


def _loc(idx, names):
    return " ".join(f"{n}={int(i)}" for n, i in zip(names, idx))


def indicator_certificate(kf: KineticField, u_levels=None, chunk: int = 64) -> Certificate:
    """f in {0,1}, nonincreasing in v, support conditions and z-reconstruction.

    Processes levels in chunks so large fields need not be copied at once.
    """
    cert = Certificate()
    vv = kf.vgrid.values
    dv = kf.vgrid.spacing
    names = ("level", "j", "i", "v_index")
    nonbin = (np.inf, None)
    incr = (0.0, None)
    below = (0.0, None)
    above = (0.0, None)
    zerr = 0.0
    zloc = None
    lo_idx = np.flatnonzero(vv < 0)
    hi_idx = np.flatnonzero(vv > 1)
    n = kf.f.shape[0]
    for s in range(0, n, chunk):
        f = np.asarray(kf.f[s:s + chunk], dtype=float)
        bad = f != f * f
        if np.any(bad) and nonbin[1] is None:
            i = np.argwhere(bad)[0]
            i[0] += s
            nonbin = (float(f[tuple(np.argwhere(bad)[0])]), i)
        d = np.diff(f, axis=-1)
        if d.size and d.max() > incr[0]:
            i = np.unravel_index(np.argmax(d), d.shape)
            incr = (float(d.max()), (i[0] + s, *i[1:]))
        if lo_idx.size:
            e = 1.0 - f[..., lo_idx]
            if np.max(np.abs(e)) > below[0]:
                i = np.unravel_index(np.argmax(np.abs(e)), e.shape)
                below = (float(np.max(np.abs(e))), (i[0] + s, *i[1:-1], lo_idx[i[-1]]))
        if hi_idx.size:
            e = f[..., hi_idx]
            if np.max(np.abs(e)) > above[0]:
                i = np.unravel_index(np.argmax(np.abs(e)), e.shape)
                above = (float(np.max(np.abs(e))), (i[0] + s, *i[1:-1], hi_idx[i[-1]]))
        if u_levels is not None:
            ones = f >= 0.5
            last = np.where(ones.any(axis=-1), ones.shape[-1] - 1 - np.argmax(ones[..., ::-1], axis=-1), -1)
            z = np.where(last >= 0, vv[np.maximum(last, 0)], vv[0] - dv)
            err = np.abs(z - np.stack(u_levels[s:s + chunk]))
            if err.max() > zerr:
                zerr = float(err.max())
                zloc = (np.unravel_index(np.argmax(err), err.shape)[0] + s,
                        *np.unravel_index(np.argmax(err), err.shape)[1:])
    cert.add("indicator_f_eq_f2", np.nan, 0.0 if nonbin[1] is None else abs(nonbin[0]), 0.0,
             nonbin[1] is None, "" if nonbin[1] is None else _loc(nonbin[1], names))
    cert.add("monotone_in_v", np.nan, incr[0], 0.0, incr[0] <= 0.0,
             "" if incr[1] is None else _loc(incr[1], names))
    cert.add("support_below_zero", np.nan, below[0], 0.0, below[0] == 0.0,
             "" if below[1] is None else _loc(below[1], names))
    cert.add("support_above_one", np.nan, above[0], 0.0, above[0] == 0.0,
             "" if above[1] is None else _loc(above[1], names))
    if u_levels is not None:
        cert.add("z_reconstruction", np.nan, zerr, dv, zerr <= dv * (1 + 1e-12),
                 "" if zloc is None else _loc(zloc, names[:3]))
    return cert


def layer_cake(kf: KineticField, power: int = 1) -> np.ndarray:
    """sum_j G'(v_j) f(v_j) w_j over [0, 1] with G(u) = u**power."""
    vv = kf.vgrid.values
    w = kf.vgrid.unit_weights() * power * np.where(vv > 0, vv, 0.0) ** (power - 1)
    return np.asarray(kf.f, dtype=float) @ w


# ---------------------------------------------------------------- defect measures

def batch_entropy_production(u_prev, u_new, vel, bsnap, dt, ks, model: FluxModel,
                             settings: TransportSettings, grid: StaggeredGrid, g_prev=None):
    """Cellwise (m+, m-, scale+, scale-) of one step for every level in ``ks``.

    m+/- have shape (len(ks), ny, nx) and are space-time cell masses; the
    scales have shape (len(ks),).  ``g_prev`` = (g(u_prev), g(u_b)) lets the
    upwind flux reuse g: for that flux g(max(u, k)) is g(u) or g(k) selected
    cellwise, bit for bit.
    """
    A = grid.cell_area
    eps, scheme = settings.epsilon, settings.scheme
    ub = bsnap.u_b
    ks = np.asarray(ks, dtype=float)
    kc = ks[:, None, None]
    kk = np.broadcast_to(kc, ks.shape + grid.shape)
    kb = np.broadcast_to(ks[:, None], ks.shape + ub.shape)
    fast = g_prev is not None and (scheme == "upwind_monotone" or model.monotone)
    if fast:
        gks = model.g(ks)
        gkc = np.broadcast_to(gks[:, None, None], kk.shape)
        gkb = np.broadcast_to(gks[:, None], kb.shape)
        gu, gub = g_prev
        Fkx, Fky = directional_fluxes(kk, kb, vel, model, eps, scheme, grid, gkc, gkb)
    else:
        Fkx, Fky = directional_fluxes(kk, kb, vel, model, eps, scheme, grid)
    out = []
    for take_max in (True, False):
        op = np.maximum if take_max else np.minimum
        uc, ubc = op(u_prev, kk), op(ub, kb)
        if fast:
            sel_c = (u_prev > kk) if take_max else (u_prev < kk)
            sel_b = (ub > kb) if take_max else (ub < kb)
            Fx, Fy = directional_fluxes(uc, ubc, vel, model, eps, scheme, grid,
                                        np.where(sel_c, gu, gkc), np.where(sel_b, gub, gkb))
        else:
            Fx, Fy = directional_fluxes(uc, ubc, vel, model, eps, scheme, grid)
        if take_max:
            Qx, Qy = Fx - Fkx, Fy - Fky
            eta0, eta1 = np.maximum(u_prev - kc, 0.0), np.maximum(u_new - kc, 0.0)
        else:
            Qx, Qy = Fkx - Fx, Fky - Fy
            eta0, eta1 = np.maximum(kc - u_prev, 0.0), np.maximum(kc - u_new, 0.0)
        m = -(A * (eta1 - eta0) + dt * A * flux_divergence(Qx, Qy, grid))
        ax, ay = np.abs(Qx) * grid.dy, np.abs(Qy) * grid.dx
        s = A * np.maximum(eta0, eta1) + dt * (ax[..., :, 1:] + ax[..., :, :-1] + ay[..., 1:, :]
                                               + ay[..., :-1, :])
        out.append((m, s.max(axis=(1, 2))))
    (mp, sp), (mm, sm) = out
    return mp, mm, sp, sm


def step_entropy_production(u_prev, u_new, vel, bsnap, dt, k, model: FluxModel,
                            settings: TransportSettings, grid: StaggeredGrid, g_prev=None):
    """Single-level form of :func:`batch_entropy_production`."""
    mp, mm, sp, sm = batch_entropy_production(u_prev, u_new, vel, bsnap, dt, [k], model, settings,
                                              grid, g_prev)
    return mp[0], mm[0], float(sp[0]), float(sm[0])


@dataclass
class DefectMeasure:
    """m+ and m- summed over space-time cells, per v, with the bound ingredients."""

    v: np.ndarray
    mass_plus: np.ndarray
    mass_minus: np.ndarray
    min_plus: np.ndarray
    min_minus: np.ndarray
    scale: np.ndarray
    init_plus: np.ndarray
    init_minus: np.ndarray
    bdry_plus: np.ndarray
    bdry_minus: np.ndarray
    cells_plus: np.ndarray | None = None
    cells_minus: np.ndarray | None = None

    def tolerance(self):
        return M_TOL * np.maximum(self.scale, 1e-300)

    def positivity_ok(self) -> bool:
        tol = self.tolerance()
        return bool(np.all(self.min_plus >= -tol) and np.all(self.min_minus >= -tol))


class EntropyProductionObserver:
    """Streams m+/- over a run; use with driver.run(observers=...) or driver.replay."""

    def __init__(self, vgrid: VGrid | None = None, keep_cells: bool = False):
        self.vgrid = vgrid or default_vgrid()
        self.keep_cells = keep_cells

    def start(self, state, traj):
        nv = self.vgrid.values.size
        self.grid = traj.grid
        self.model = traj.model
        self.settings = traj.config.transport
        z = np.zeros(nv)
        self.mass_plus, self.mass_minus = z.copy(), z.copy()
        self.min_plus, self.min_minus = np.full(nv, np.inf), np.full(nv, np.inf)
        self.scale = z.copy()
        A = self.grid.cell_area
        vv = self.vgrid.values
        self.init_plus = np.array([np.sum(np.maximum(state.u - k, 0.0)) * A for k in vv])
        self.init_minus = np.array([np.sum(np.maximum(k - state.u, 0.0)) * A for k in vv])
        self.bdry_plus, self.bdry_minus = z.copy(), z.copy()
        if self.keep_cells:
            self.cells_plus = np.zeros((nv, *self.grid.shape))
            self.cells_minus = np.zeros((nv, *self.grid.shape))

    def step(self, prev, new, traj):
        vel = new.transport_v if new.transport_v is not None else new.v
        bs = new.transport_b if new.transport_b is not None else new.bsnap
        M = self.model.K * np.abs(bs.b_n) * self.grid.bface_length
        gp = (self.model.g(prev.u), self.model.g(bs.u_b))
        vv = self.vgrid.values
        mp, mm, sp, sm = batch_entropy_production(prev.u, new.u, vel, bs, new.dt, vv, self.model,
                                                  self.settings, self.grid, gp)
        self.mass_plus += mp.sum(axis=(1, 2))
        self.mass_minus += mm.sum(axis=(1, 2))
        self.min_plus = np.minimum(self.min_plus, mp.min(axis=(1, 2)))
        self.min_minus = np.minimum(self.min_minus, mm.min(axis=(1, 2)))
        self.scale = np.maximum(self.scale, np.maximum(sp, sm))
        self.bdry_plus += new.dt * (np.maximum(bs.u_b - vv[:, None], 0.0) @ M)
        self.bdry_minus += new.dt * (np.maximum(vv[:, None] - bs.u_b, 0.0) @ M)
        if self.keep_cells:
            self.cells_plus += mp
            self.cells_minus += mm

    def finish(self, traj):
        pass

    def measure(self) -> DefectMeasure:
        mins = [np.where(np.isfinite(m), m, 0.0) for m in (self.min_plus, self.min_minus)]
        return DefectMeasure(self.vgrid.values.copy(), self.mass_plus, self.mass_minus, mins[0],
                             mins[1], self.scale, self.init_plus, self.init_minus,
                             self.bdry_plus, self.bdry_minus,
                             self.cells_plus if self.keep_cells else None,
                             self.cells_minus if self.keep_cells else None)

    def estimate_rows(self):
        """(v, lhs, rhs, margin) of the m+ estimate per v."""
        rhs = self.init_plus + self.bdry_plus
        return [(float(v), float(l), float(r), float(r - l))
                for v, l, r in zip(self.vgrid.values, self.mass_plus, rhs)]

    def min_scaled(self) -> float:
        m = self.measure()
        s = np.maximum(m.scale, 1e-300)
        return float(min(np.min(m.min_plus / s), np.min(m.min_minus / s)))


def _require_dense(traj):
    if not getattr(traj, "dense", False):
        raise DataError("entropy production needs every step stored; rerun with output_dt = 0")


def entropy_production(traj, v, keep_cells: bool = True) -> DefectMeasure:
    """Defect measure for one or several v from a trajectory stored every step."""
    from .driver import replay
    _require_dense(traj)
    obs = EntropyProductionObserver(VGrid(np.atleast_1d(np.asarray(v, float))), keep_cells)
    replay(traj, [obs])
    return obs.measure()


@dataclass(frozen=True)
class MEstimate:
    v: float
    lhs_plus: float
    rhs_plus: float
    lhs_minus: float
    rhs_minus: float
    tol: float

    @property
    def margin_plus(self) -> float:
        return self.rhs_plus - self.lhs_plus

    @property
    def margin_minus(self) -> float:
        return self.rhs_minus - self.lhs_minus

    @property
    def passed(self) -> bool:
        return self.margin_plus >= -self.tol and self.margin_minus >= -self.tol


def m_estimate_check(measure: DefectMeasure, v: float) -> MEstimate:
    """Total m+ mass against int |u0 - v|+ + int M |u_b - v|+, and the m- analogue."""
    j = int(np.argmin(np.abs(measure.v - v)))
    if abs(measure.v[j] - v) > 1e-12:
        raise DomainError(f"v={v} is not in the measure's v-grid")
    tol = float(measure.tolerance()[j])
    return MEstimate(float(v), float(measure.mass_plus[j]),
                     float(measure.init_plus[j] + measure.bdry_plus[j]),
                     float(measure.mass_minus[j]),
                     float(measure.init_minus[j] + measure.bdry_minus[j]), tol)


# ---------------------------------------------------------------- weak residual

def _hat(x, c, w):
    return np.maximum(0.0, 1.0 - np.abs(x - c) / w)


def _hat_integral(x, c, w):
    """int_{-inf}^x of the hat centered at c with half-width w."""
    s = np.clip((np.asarray(x, float) - c) / w, -1.0, 1.0)
    return w * np.where(s < 0, 0.5 * (s + 1) ** 2, 1.0 - 0.5 * (1 - s) ** 2)


@dataclass(frozen=True)
class HatFamily:
    """Tensor-product hats on an nt x nx x ny lattice, scaled by nonnegative weights.

    Time nodes are a*T/nt (a = 0..nt-1) with half-width T/nt, so every
    function vanishes at T; space nodes span the closed side with half-width
    side/(n-1), so functions reach the boundary.
    """

    nt: int = 4
    nx: int = 4
    ny: int = 4
    weights: np.ndarray | None = None

    def __post_init__(self):
        if min(self.nt, self.nx, self.ny) < 1 or min(self.nx, self.ny) < 2:
            raise DomainError("hat family needs nt >= 1 and nx, ny >= 2")
        if self.weights is not None:
            w = np.broadcast_to(np.asarray(self.weights, float), (self.nt, self.ny, self.nx))
            if np.any(w < 0) or np.any(~np.isfinite(w)):
                raise DomainError("test functions must be nonnegative")

    def w(self):
        return np.ones((self.nt, self.ny, self.nx)) if self.weights is None else \
            np.broadcast_to(np.asarray(self.weights, float), (self.nt, self.ny, self.nx))

    @property
    def size(self) -> int:
        return self.nt * self.nx * self.ny


def _contract(f, Py, Px):
    """sum_{j,i} f[k, j, i] Py[b, j] Px[a, i] -> (k, b, a)."""
    return np.matmul(Py, np.matmul(f, Px.T))


class WeakResidualObserver:
    """Accumulates the Kruzhkov weak-form residual for every (v, test function).

    Each step contributes on its slab with the pre-step saturation and the
    velocity and boundary data used by that step.  Time factors are integrated
    exactly on the slab and space factors are exact cell or face averages;
    the flux term uses cell-centered velocity.
    """

    def __init__(self, vvalues=None, family: HatFamily | None = None):
        vv = default_vgrid().values[1:-1] if vvalues is None else vvalues
        self.v = np.atleast_1d(np.asarray(vv, dtype=float))
        self.family = family or HatFamily()

    def start(self, state, traj):
        g = self.grid = traj.grid
        self.model = traj.model
        fam = self.family
        self.T = traj.config.T
        self.tc = np.arange(fam.nt) * self.T / fam.nt
        self.tw = self.T / fam.nt
        xc = np.linspace(0, g.Lx, fam.nx)
        yc = np.linspace(0, g.Ly, fam.ny)
        wx, wy = g.Lx / (fam.nx - 1), g.Ly / (fam.ny - 1)
        xe, ye = g.xn, g.yn
        # cell averages of hats and of their derivatives: (n_hat, n_cells)
        self.Px = np.stack([(_hat_integral(xe[1:], c, wx) - _hat_integral(xe[:-1], c, wx)) / g.dx for c in xc])
        self.Dx = np.stack([(_hat(xe[1:], c, wx) - _hat(xe[:-1], c, wx)) / g.dx for c in xc])
        self.Py = np.stack([(_hat_integral(ye[1:], c, wy) - _hat_integral(ye[:-1], c, wy)) / g.dy for c in yc])
        self.Dy = np.stack([(_hat(ye[1:], c, wy) - _hat(ye[:-1], c, wy)) / g.dy for c in yc])
        # hat values on the four sides: (n_hat,) at x=0, x=Lx, y=0, y=Ly
        self.x0 = _hat(0.0, xc, wx)
        self.x1 = _hat(g.Lx, xc, wx)
        self.y0 = _hat(0.0, yc, wy)
        self.y1 = _hat(g.Ly, yc, wy)
        nv = self.v.size
        self.R = np.zeros((nv, fam.nt, fam.ny, fam.nx))
        self.gk = self.model.g(self.v)
        A = g.cell_area
        d0 = np.abs(state.u[None] - self.v[:, None, None])
        S = _contract(d0, self.Py, self.Px) * A
        phi0 = _hat(0.0, self.tc, self.tw)
        self.R += phi0[None, :, None, None] * S[:, None]

    def _space_terms(self, u, vel, bs):
        g = self.grid
        A = g.cell_area
        vv = self.v[:, None, None]
        d = np.abs(u[None] - vv)
        q = np.sign(u[None] - vv) * (self.model.g(u)[None] - self.gk[:, None, None])
        vcx = 0.5 * (vel.vx[:, 1:] + vel.vx[:, :-1])
        vcy = 0.5 * (vel.vy[1:, :] + vel.vy[:-1, :])
        S0 = _contract(d, self.Py, self.Px) * A
        S1 = (_contract(q * vcx[None], self.Py, self.Dx) + _contract(q * vcy[None], self.Dy, self.Px)) * A
        # boundary term M |u_b - v| phi on each side
        M = self.model.K * np.abs(bs.b_n)
        e = np.abs(bs.u_b[None, :] - self.v[:, None]) * M[None, :]
        sl = [g.side_slice(s) for s in ("left", "right", "bottom", "top")]
        Sb = (np.einsum("kj,bj,a->kba", e[:, sl[0]] * g.dy, self.Py, self.x0)
              + np.einsum("kj,bj,a->kba", e[:, sl[1]] * g.dy, self.Py, self.x1)
              + np.einsum("ki,b,ai->kba", e[:, sl[2]] * g.dx, self.y0, self.Px)
              + np.einsum("ki,b,ai->kba", e[:, sl[3]] * g.dx, self.y1, self.Px))
        return S0, S1 + Sb

    def step(self, prev, new, traj):
        vel = new.transport_v if new.transport_v is not None else new.v
        bs = new.transport_b if new.transport_b is not None else new.bsnap
        S0, S1 = self._space_terms(prev.u, vel, bs)
        t0, t1 = prev.t, new.t
        dphi = _hat(t1, self.tc, self.tw) - _hat(t0, self.tc, self.tw)
        iphi = _hat_integral(t1, self.tc, self.tw) - _hat_integral(t0, self.tc, self.tw)
        self.R += dphi[None, :, None, None] * S0[:, None] + iphi[None, :, None, None] * S1[:, None]

    def finish(self, traj):
        pass

    def residuals(self) -> np.ndarray:
        """(n_v, nt, ny, nx) residuals, multiplied by the family weights."""
        return self.R * self.family.w()[None]

    def minimum(self) -> float:
        return float(self.residuals().min())


def weak_tolerance(traj, constant: float = WEAK_TOL_CONSTANT) -> float:
    """C (dx + max dt) (|Omega| + T |Gamma| K max|b_n|)."""
    g = traj.grid
    h = g.dx if g.ny == 1 else max(g.dx, g.dy)
    dt = max(traj.dts) if traj.dts else 0.0
    bn = max(float(np.max(np.abs(traj.boundary.b_n))), 0.0)
    scale = g.Lx * g.Ly + traj.config.T * g.perimeter * traj.model.K * bn
    return constant * (h + dt) * scale


def weak_solution_residual(traj, v, family: HatFamily | None = None) -> float:
    """Minimum weak-form residual over the family for the given v value(s)."""
    from .driver import replay
    _require_dense(traj)
    obs = WeakResidualObserver(np.atleast_1d(v), family)
    replay(traj, [obs])
    return obs.minimum()


# ---------------------------------------------------------------- boundary measures

def _gauss_integral(fn, a, b):
    """Gauss-Legendre integral of fn over [a, b] (elementwise arrays a, b)."""
    x, w = _GAUSS
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[..., None] + half[..., None] * x
    return half * np.sum(w * fn(pts), axis=-1)


@dataclass
class BoundaryMeasures:
    v: np.ndarray
    plus: np.ndarray  # (level, face, v)
    minus: np.ndarray
    certificate: Certificate


def boundary_measures(traj, vgrid: VGrid | None = None, levels=None) -> BoundaryMeasures:
    """m+^b and m-^b on boundary faces from the first-layer trace f^b.

    m+^b = int_v^1 g'(s) b_n f^b(s) ds + M |u_b - v|+ and
    m-^b = int_0^v g'(s) b_n (1 - f^b(s)) ds + M |u_b - v|-, with M = K |b_n|.
    With f^b an indicator, the s-integrals run over [v, max(u, v)] clipped to
    [0, 1] and [min(u, v), v] clipped to [0, 1]; both use Gauss-Legendre.
    """
    vgrid = vgrid or default_vgrid()
    grid, model = traj.grid, traj.model
    vv = vgrid.values
    K = model.K
    states = traj.states if levels is None else [traj.states[i] for i in levels]
    P, Mn = [], []
    cert = Certificate()
    worst_p = worst_m = np.inf
    trace_bad = 0
    trace_total = 0
    for st in states:
        ua = _boundary_cells(st.u, grid)[:, None]
        bn = st.bsnap.b_n[:, None]
        ub = st.bsnap.u_b[:, None]
        V = np.broadcast_to(vv[None, :], (ua.shape[0], vv.size))
        lo_p = np.clip(V, 0, 1)
        hi_p = np.clip(np.maximum(ua, V), 0, 1)
        ip = np.where(hi_p > lo_p, _gauss_integral(model.gprime, lo_p, hi_p), 0.0)
        lo_m = np.clip(np.minimum(ua, V), 0, 1)
        hi_m = np.clip(V, 0, 1)
        im = np.where(hi_m > lo_m, _gauss_integral(model.gprime, lo_m, hi_m), 0.0)
        M = K * np.abs(bn)
        mp = bn * ip + M * np.maximum(ub - V, 0.0)
        mm = bn * im + M * np.maximum(V - ub, 0.0)
        P.append(mp)
        Mn.append(mm)
        # first-layer averaging error allowance: u_adj may sit beyond u_b
        allow = K * np.abs(bn) * np.abs(ua - ub)
        worst_p = min(worst_p, float(np.min(mp + allow)))
        worst_m = min(worst_m, float(np.min(mm + allow)))
        inflow = (model.gprime(V) * bn) < 0
        fb = sgn_plus(ua - V)
        fub = sgn_plus(ub - V)
        layer_ok = np.abs(ua - V) <= np.abs(ua - ub)
        mismatch = inflow & (fb != fub) & ~layer_ok
        trace_bad += int(np.count_nonzero(mismatch))
        trace_total += int(np.count_nonzero(inflow))
    P = np.stack(P)
    Mn = np.stack(Mn)
    cert.add("boundary_m_plus_nonnegative", np.nan, worst_p, 0.0, worst_p >= -1e-12)
    cert.add("boundary_m_minus_nonnegative", np.nan, worst_m, 0.0, worst_m >= -1e-12)
    sup_p = float(np.max(np.abs(P[..., vv >= 1]))) if np.any(vv >= 1) else 0.0
    sup_m = float(np.max(np.abs(Mn[..., vv <= 0]))) if np.any(vv <= 0) else 0.0
    cert.add("boundary_m_plus_support", np.nan, sup_p, 0.0, sup_p == 0.0)
    cert.add("boundary_m_minus_support", np.nan, sup_m, 0.0, sup_m == 0.0)
    cert.add("inflow_trace_indicator", np.nan, trace_bad, 0.0, trace_bad == 0,
             f"checked={trace_total}")
    return BoundaryMeasures(vv, P, Mn, cert)


# ---------------------------------------------------------------- v-differentiated balance

def kinetic_balance_check(traj, psi, vgrid: VGrid | None = None, nquad: int = 400):
    """Compare sum_j w_j psi(v_j) m+(v_j) with the direct psi-entropy production.

    psi should be smooth and supported in [0, 1].  The direct side uses the
    entropy eta_psi(u) = int psi(v)(u - v)+ dv and its flux built from the same
    one-sided face fluxes, both integrated in v by fine quadrature.  Returns
    (max cellwise difference, max cellwise magnitude) accumulated over steps.
    """
    vgrid = vgrid or default_vgrid()
    _require_dense(traj)
    grid, model = traj.grid, traj.model
    st = traj.config.transport
    vv = vgrid.values
    w = vgrid.unit_weights() * psi(np.clip(vv, 0, 1))
    x, wq = np.polynomial.legendre.leggauss(nquad)
    sq = 0.5 * (x + 1)
    wq = 0.5 * wq * psi(sq)
    diff = 0.0
    mag = 0.0
    for prev, new in traj.steps():
        vel = new.transport_v if new.transport_v is not None else new.v
        bs = new.transport_b if new.transport_b is not None else new.bsnap
        gp = (model.g(prev.u), model.g(bs.u_b))
        nz = np.flatnonzero(w)
        mp = batch_entropy_production(prev.u, new.u, vel, bs, new.dt, vv[nz], model, st, grid, gp)[0]
        lhs = np.tensordot(w[nz], mp, axes=1)
        mp = batch_entropy_production(prev.u, new.u, vel, bs, new.dt, sq, model, st, grid, gp)[0]
        rhs = np.tensordot(wq, mp, axes=1)
        diff = max(diff, float(np.max(np.abs(lhs - rhs))))
        mag = max(mag, float(np.max(np.abs(rhs))))
    return diff, mag
