"""Monotone finite-volume transport of the saturation.

Solves du/dt + div(v g(u)) = eps*Lap(u) explicitly on cell averages.  Fluxes
are returned per face as directional fluxes (positive along +x or +y), which
makes the same routine usable for the update itself and for the entropy
fluxes used by the kinetic diagnostics (evaluate at max(u, k) or min(u, k)).

Boundary treatment: the advective flux takes u_b on inflow faces and the
interior value on outflow faces.  For eps > 0 an outflow face also carries the
Robin exchange M*(u_b - u_in) with M = K*|b_n|; inflow faces carry no
diffusive flux because the advective flux already imports u_b.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CFLError, DomainError, NumericError
from .grid import BoundarySnapshot, StaggeredGrid, VelocityField
from .model import FluxModel

log = logging.getLogger(__name__)

SCHEMES = ("upwind_monotone", "engquist_osher", "godunov")


@dataclass(frozen=True)
class TransportSettings:
    epsilon: float = 0.0
    cfl: float = 0.5
    scheme: str = "upwind_monotone"
    mollify_data: bool = False
    dt_max: float = 1e-2

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError("transport.epsilon must be nonnegative")
        if not 0 < self.cfl <= 1:
            raise DomainError("transport.cfl must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown transport.scheme {self.scheme!r}")
        if not self.dt_max > 0:
            raise DomainError("dt_max must be positive")


@dataclass(frozen=True, eq=False)
class SaturationField:
    """Cell saturations at time t; raw_min/raw_max are the values before clamping."""

    u: np.ndarray
    t: float = 0.0
    raw_min: float = np.nan
    raw_max: float = np.nan
    clamp: float = 0.0


def _godunov_min_max(f, a, b, take_min, samples=65):
    s = np.linspace(0.0, 1.0, samples)
    pts = a[..., None] + (b - a)[..., None] * s
    vals = f(pts)
    return vals.min(axis=-1) if take_min else vals.max(axis=-1)


def face_flux(u_L, u_R, v_n, model: FluxModel, scheme: str = "upwind_monotone"):
    """Numerical flux for s -> v_n g(s) across a face with left/right states."""
    u_L, u_R, v_n = np.broadcast_arrays(np.asarray(u_L, float), np.asarray(u_R, float),
                                        np.asarray(v_n, float))
    if scheme not in SCHEMES:
        raise DomainError(f"unknown flux scheme {scheme!r}")
    if scheme == "upwind_monotone" or model.monotone:
        return np.where(v_n >= 0, v_n * model.g(u_L), v_n * model.g(u_R))
    if scheme == "engquist_osher":
        g0 = float(model.g(0.0))
        pL, mL = model.flux_split(u_L)
        pR, mR = model.flux_split(u_R)
        return np.where(v_n >= 0, v_n * (g0 + pL + mR), v_n * (g0 + mL + pR))

    def f(s):
        return model.g(s)

    lo = np.minimum(u_L, u_R)
    hi = np.maximum(u_L, u_R)
    gmin = _godunov_min_max(f, lo, hi, True)
    gmax = _godunov_min_max(f, lo, hi, False)
    # for v_n >= 0: min over [uL,uR] if uL <= uR else max; mirrored for v_n < 0
    up = u_L <= u_R
    pos = np.where(up, gmin, gmax)
    neg = np.where(up, gmax, gmin)
    return np.where(v_n >= 0, v_n * pos, v_n * neg)


def _boundary_split(grid: StaggeredGrid, arr):
    return tuple(arr[..., grid.side_slice(s)] for s in ("left", "right", "bottom", "top"))


def directional_fluxes(u, u_b, v: VelocityField, model: FluxModel, epsilon: float,
                       scheme: str, grid: StaggeredGrid, g_cells=None, g_bdry=None):
    """Total face fluxes (advective minus diffusive) along +x and +y.

    Returns Fx with shape (..., ny, nx+1) and Fy with shape (..., ny+1, nx);
    leading axes of u and u_b are treated as a batch.  For the upwind flux,
    precomputed g(u) and g(u_b) may be passed to skip evaluating g.
    """
    vx, vy = v.vx, v.vy
    batch = np.shape(u)[:-2]
    Fx = np.empty(batch + grid.vx_shape)
    Fy = np.empty(batch + grid.vy_shape)
    ubl, ubr, ubb, ubt = _boundary_split(grid, u_b)
    if scheme == "upwind_monotone" or model.monotone:
        G = model.g(u) if g_cells is None else g_cells
        Gb = model.g(u_b) if g_bdry is None else g_bdry
        gl, gr, gb, gt = _boundary_split(grid, Gb)

        def up(vn, a, b):
            return np.where(vn >= 0, vn * a, vn * b)

        Fx[..., :, 1:-1] = up(vx[:, 1:-1], G[..., :, :-1], G[..., :, 1:])
        Fy[..., 1:-1, :] = up(vy[1:-1, :], G[..., :-1, :], G[..., 1:, :])
        Fx[..., :, 0] = up(vx[:, 0], gl, G[..., :, 0])
        Fx[..., :, -1] = up(vx[:, -1], G[..., :, -1], gr)
        Fy[..., 0, :] = up(vy[0, :], gb, G[..., 0, :])
        Fy[..., -1, :] = up(vy[-1, :], G[..., -1, :], gt)
    else:
        Fx[..., :, 1:-1] = face_flux(u[..., :, :-1], u[..., :, 1:], vx[:, 1:-1], model, scheme)
        Fy[..., 1:-1, :] = face_flux(u[..., :-1, :], u[..., 1:, :], vy[1:-1, :], model, scheme)
        Fx[..., :, 0] = face_flux(ubl, u[..., :, 0], vx[:, 0], model, scheme)
        Fx[..., :, -1] = face_flux(u[..., :, -1], ubr, vx[:, -1], model, scheme)
        Fy[..., 0, :] = face_flux(ubb, u[..., 0, :], vy[0, :], model, scheme)
        Fy[..., -1, :] = face_flux(u[..., -1, :], ubt, vy[-1, :], model, scheme)
    if epsilon > 0:
        Fx[..., :, 1:-1] -= epsilon * (u[..., :, 1:] - u[..., :, :-1]) / grid.dx
        if grid.ny > 1:
            Fy[..., 1:-1, :] -= epsilon * (u[..., 1:, :] - u[..., :-1, :]) / grid.dy
        K = model.K
        # Robin exchange on outflow faces; gain into the domain is M (u_b - u_in)
        out_l = np.maximum(-vx[:, 0], 0.0)
        out_r = np.maximum(vx[:, -1], 0.0)
        out_b = np.maximum(-vy[0, :], 0.0)
        out_t = np.maximum(vy[-1, :], 0.0)
        Fx[..., :, 0] += K * out_l * (ubl - u[..., :, 0])
        Fx[..., :, -1] -= K * out_r * (ubr - u[..., :, -1])
        Fy[..., 0, :] += K * out_b * (ubb - u[..., 0, :])
        Fy[..., -1, :] -= K * out_t * (ubt - u[..., -1, :])
    return Fx, Fy


def flux_divergence(Fx, Fy, grid: StaggeredGrid):
    return (Fx[..., :, 1:] - Fx[..., :, :-1]) / grid.dx + (Fy[..., 1:, :] - Fy[..., :-1, :]) / grid.dy


def boundary_outflux(Fx, Fy, grid: StaggeredGrid):
    """Outward flux times face length, per boundary face (face-list order)."""
    return np.concatenate([-Fx[:, 0] * grid.dy, Fx[:, -1] * grid.dy,
                           -Fy[0, :] * grid.dx, Fy[-1, :] * grid.dx])


def monotone_rate(v: VelocityField, model: FluxModel, epsilon: float, grid: StaggeredGrid):
    """Per-cell bound on the sensitivity of the update, so that dt*rate <= 1 is monotone."""
    vx, vy = v.vx, v.vy
    dx, dy = grid.dx, grid.dy
    inflow = (np.maximum(vx[:, :-1], 0) + np.maximum(-vx[:, 1:], 0)) / dx
    inflow = inflow + (np.maximum(vy[:-1, :], 0) + np.maximum(-vy[1:, :], 0)) / dy
    rate = model.K * inflow
    if epsilon > 0:
        nbx = np.full(grid.shape, 2.0)
        nbx[:, 0] -= 1
        nbx[:, -1] -= 1
        rate = rate + epsilon * nbx / dx**2
        if grid.ny > 1:
            nby = np.full(grid.shape, 2.0)
            nby[0, :] -= 1
            nby[-1, :] -= 1
            rate = rate + epsilon * nby / dy**2
        robin = np.zeros(grid.shape)
        robin[:, 0] += np.maximum(-vx[:, 0], 0) / dx
        robin[:, -1] += np.maximum(vx[:, -1], 0) / dx
        robin[0, :] += np.maximum(-vy[0, :], 0) / dy
        robin[-1, :] += np.maximum(vy[-1, :], 0) / dy
        rate = rate + model.K * robin
    return rate


def stable_dt(u, v: VelocityField, model: FluxModel, settings: TransportSettings,
              grid: StaggeredGrid) -> float:
    """Explicit step bound.

    cfl * min(dx/(K max|vx|), dy/(K max|vy|), min(dx,dy)^2/(4 eps)), further
    limited by the cellwise monotonicity bound 1/max(rate) and by dt_max.
    """
    K = model.K
    cands = [settings.dt_max / settings.cfl]
    mx = float(np.max(np.abs(v.vx)))
    my = float(np.max(np.abs(v.vy)))
    if mx > 0:
        cands.append(grid.dx / (K * mx))
    if my > 0:
        cands.append(grid.dy / (K * my))
    eps = settings.epsilon
    if eps > 0:
        h = grid.dx if grid.ny == 1 else min(grid.dx, grid.dy)
        cands.append(h * h / (4 * eps))
    rate = float(np.max(monotone_rate(v, model, eps, grid)))
    if rate > 0:
        cands.append(1.0 / rate)
    return settings.cfl * min(cands)


def step_saturation(u, v: VelocityField, boundary: BoundarySnapshot, model: FluxModel,
                    settings: TransportSettings, dt: float, grid: StaggeredGrid,
                    check_dt: bool = True) -> SaturationField:
    """One explicit monotone step; the result is clamped to [0, 1]."""
    t0 = 0.0
    if isinstance(u, SaturationField):
        t0 = u.t
        u = u.u
    u = np.asarray(u, dtype=float)
    if check_dt:
        bound = stable_dt(u, v, model, settings, grid)
        if dt > bound * (1 + 1e-12):
            raise CFLError(dt, bound)
    Fx, Fy = directional_fluxes(u, boundary.u_b, v, model, settings.epsilon, settings.scheme, grid)
    raw = u - dt * flux_divergence(Fx, Fy, grid)
    if not np.all(np.isfinite(raw)):
        j, i = np.argwhere(~np.isfinite(raw))[0]
        raise NumericError(f"non-finite saturation in cell (i={i}, j={j})")
    lo, hi = float(raw.min()), float(raw.max())
    clamp = max(0.0, -lo, hi - 1.0)
    if clamp > 0:
        log.debug("clamped saturation by %.3e", clamp)
    return SaturationField(np.clip(raw, 0.0, 1.0), t0 + dt, lo, hi, clamp)
