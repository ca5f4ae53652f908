"""Staggered (MAC) grid, boundary and initial data, discrete norms.

Array layout is row-major with y outer and x inner:

* cell fields (u, p): shape (ny, nx)
* x-face velocity vx: shape (ny, nx + 1), column i sits at x = i*dx
* y-face velocity vy: shape (ny + 1, nx), row j sits at y = j*dy

Boundary faces are listed side by side: left (ny faces, bottom to top),
right (ny), bottom (nx faces, left to right), top (nx).  ``b_n`` is the
outward normal velocity; ``b_t`` is the tangential component along +y on the
left/right sides and along +x on the bottom/top sides.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DomainError, StructuralError

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class StaggeredGrid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 4:
            raise DomainError("grid.nx must be >= 4")
        if int(self.ny) != self.ny or not (self.ny >= 4 or self.ny == 1):
            raise DomainError("grid.ny must be >= 4 (or 1 for a one-dimensional slice)")
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError("grid lengths must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def vx_shape(self):
        return (self.ny, self.nx + 1)

    @property
    def vy_shape(self):
        return (self.ny + 1, self.nx)

    @property
    def slice_mode(self) -> bool:
        return self.ny == 1

    @cached_property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.dy

    @cached_property
    def xn(self):
        """x coordinates of vertical grid lines (x-face positions)."""
        return np.arange(self.nx + 1) * self.dx

    @cached_property
    def yn(self):
        return np.arange(self.ny + 1) * self.dy

    def cell_centers(self):
        return np.meshgrid(self.xc, self.yc)

    def xface_centers(self):
        return np.meshgrid(self.xn, self.yc)

    def yface_centers(self):
        return np.meshgrid(self.xc, self.yn)

    @property
    def n_bfaces(self) -> int:
        return 2 * self.ny + 2 * self.nx

    def side_slice(self, side: str) -> slice:
        ny, nx = self.ny, self.nx
        start = {"left": 0, "right": ny, "bottom": 2 * ny, "top": 2 * ny + nx}[side]
        return slice(start, start + (ny if side in ("left", "right") else nx))

    @cached_property
    def bface_length(self):
        return np.concatenate([np.full(self.ny, self.dy), np.full(self.ny, self.dy),
                               np.full(self.nx, self.dx), np.full(self.nx, self.dx)])

    @cached_property
    def bface_center(self):
        """(x, y) of every boundary face midpoint, shape (n_bfaces, 2)."""
        xs = np.concatenate([np.zeros(self.ny), np.full(self.ny, self.Lx), self.xc, self.xc])
        ys = np.concatenate([self.yc, self.yc, np.zeros(self.nx), np.full(self.nx, self.Ly)])
        return np.stack([xs, ys], axis=1)

    @cached_property
    def bface_normal(self):
        n = np.zeros((self.n_bfaces, 2))
        n[self.side_slice("left")] = (-1.0, 0.0)
        n[self.side_slice("right")] = (1.0, 0.0)
        n[self.side_slice("bottom")] = (0.0, -1.0)
        n[self.side_slice("top")] = (0.0, 1.0)
        return n

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.Lx + self.Ly)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Face-normal velocities and (optionally) the zero-mean pressure."""

    vx: np.ndarray
    vy: np.ndarray
    p: np.ndarray | None = None

    def check_shape(self, grid: StaggeredGrid):
        if self.vx.shape != grid.vx_shape or self.vy.shape != grid.vy_shape:
            raise StructuralError(
                f"velocity shapes {self.vx.shape}, {self.vy.shape} do not match grid "
                f"{grid.vx_shape}, {grid.vy_shape}")

    def boundary_normal(self, grid: StaggeredGrid):
        """Outward normal velocity on the boundary faces, in face-list order."""
        return np.concatenate([-self.vx[:, 0], self.vx[:, -1], -self.vy[0, :], self.vy[-1, :]])

    def cell_average(self):
        return 0.5 * (self.vx[:, 1:] + self.vx[:, :-1]), 0.5 * (self.vy[1:, :] + self.vy[:-1, :])

    def max_abs(self):
        return max(float(np.max(np.abs(self.vx))), float(np.max(np.abs(self.vy))))

    @classmethod
    def zeros(cls, grid: StaggeredGrid):
        return cls(np.zeros(grid.vx_shape), np.zeros(grid.vy_shape), np.zeros(grid.shape))

    @classmethod
    def uniform(cls, grid: StaggeredGrid, ax: float, ay: float):
        return cls(np.full(grid.vx_shape, float(ax)), np.full(grid.vy_shape, float(ay)),
                   np.zeros(grid.shape))


@dataclass(frozen=True)
class BoundarySnapshot:
    t: float
    u_b: np.ndarray
    b_n: np.ndarray
    b_t: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Face data on a time grid, linear in time between levels.

    Arrays have shape (len(times), n_bfaces).  Outside the time grid the
    first/last level is held constant.
    """

    times: np.ndarray
    u_b: np.ndarray
    b_n: np.ndarray
    b_t: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        object.__setattr__(self, "times", t)
        for name in ("u_b", "b_n", "b_t"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[None, :]
            if a.shape[0] != t.size:
                raise StructuralError(f"{name} has {a.shape[0]} time levels, expected {t.size}")
            object.__setattr__(self, name, a)
        if np.any(np.diff(t) <= 0):
            raise StructuralError("boundary time levels must increase")
        if not (self.u_b.shape == self.b_n.shape == self.b_t.shape):
            raise StructuralError("u_b, b_n and b_t must have the same shape")

    @property
    def n_faces(self):
        return self.u_b.shape[1]

    def at(self, t: float) -> BoundarySnapshot:
        times = self.times
        if times.size == 1 or t <= times[0]:
            k, w = 0, 0.0
        elif t >= times[-1]:
            k, w = times.size - 2, 1.0
        else:
            k = int(np.searchsorted(times, t, side="right") - 1)
            w = (t - times[k]) / (times[k + 1] - times[k])
        if times.size == 1:
            return BoundarySnapshot(t, self.u_b[0], self.b_n[0], self.b_t[0])

        def lerp(a):
            if w == 0.0:
                return a[k].copy()
            if w == 1.0:
                return a[k + 1].copy()
            return (1.0 - w) * a[k] + w * a[k + 1]

        return BoundarySnapshot(t, lerp(self.u_b), lerp(self.b_n), lerp(self.b_t))

    def check_grid(self, grid: StaggeredGrid):
        if self.n_faces != grid.n_bfaces:
            raise StructuralError(f"boundary data has {self.n_faces} faces, grid has {grid.n_bfaces}")

    @classmethod
    def constant(cls, u_b, b_n, b_t):
        return cls(np.array([0.0]), np.asarray(u_b, float)[None], np.asarray(b_n, float)[None],
                   np.asarray(b_t, float)[None])


@dataclass(frozen=True, eq=False)
class InitialData:
    u0: np.ndarray
    v0: VelocityField | None = None


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, passed, value, bound):
        self.checks.append((name, bool(passed), float(value), float(bound)))

    @property
    def ok(self) -> bool:
        return all(c[1] for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c[1]]

    def __str__(self):
        lines = [f"{'PASS' if p else 'FAIL'} {n}: value={v:.3e} bound={b:.3e}"
                 for n, p, v, b in self.checks]
        return "\n".join(lines)


def net_flux(grid: StaggeredGrid, b_n) -> float:
    return float(np.sum(np.asarray(b_n) * grid.bface_length))


def discrete_divergence(v: VelocityField, grid: StaggeredGrid):
    v.check_shape(grid)
    return (v.vx[:, 1:] - v.vx[:, :-1]) / grid.dx + (v.vy[1:, :] - v.vy[:-1, :]) / grid.dy


def validate_data(grid: StaggeredGrid, boundary: BoundaryData, init: InitialData,
                  tau: float) -> ValidationReport:
    """Check bounds, zero net flux and initial-velocity compatibility."""
    boundary.check_grid(grid)
    if np.shape(init.u0) != grid.shape:
        raise StructuralError(f"u0 has shape {np.shape(init.u0)}, grid needs {grid.shape}")
    rep = ValidationReport()
    u0 = np.asarray(init.u0)
    rep.add("u0_lower", u0.min() >= 0.0, -min(u0.min(), 0.0), 0.0)
    rep.add("u0_upper", u0.max() <= 1.0, max(u0.max() - 1.0, 0.0), 0.0)
    rep.add("ub_lower", boundary.u_b.min() >= 0.0, -min(boundary.u_b.min(), 0.0), 0.0)
    rep.add("ub_upper", boundary.u_b.max() <= 1.0, max(boundary.u_b.max() - 1.0, 0.0), 0.0)
    tol = 1e-10 * grid.perimeter
    flux = np.abs(boundary.b_n @ grid.bface_length)
    worst = float(flux.max())
    rep.add("net_flux_zero", worst <= tol, worst, tol)
    if tau > 0:
        if init.v0 is None:
            rep.add("v0_present", False, 1.0, 0.0)
        else:
            init.v0.check_shape(grid)
            div = float(np.max(np.abs(discrete_divergence(init.v0, grid))))
            rep.add("v0_divergence", div <= 1e-12 * max(1.0, init.v0.max_abs()) / min(grid.dx, grid.dy),
                    div, 1e-12 * max(1.0, init.v0.max_abs()) / min(grid.dx, grid.dy))
            mis = float(np.max(np.abs(init.v0.boundary_normal(grid) - boundary.at(boundary.times[0]).b_n)))
            rep.add("v0_normal_trace", mis <= 1e-12, mis, 1e-12)
    return rep


def norms(f, grid: StaggeredGrid, kind: str) -> float:
    """Midpoint-rule norms of a cell-centered field."""
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise StructuralError(f"field shape {f.shape} does not match grid {grid.shape}")
    a = grid.cell_area
    if kind == "L1":
        return float(np.sum(np.abs(f)) * a)
    if kind == "L2":
        return float(np.sqrt(np.sum(f * f) * a))
    if kind == "Linf":
        return float(np.max(np.abs(f)))
    if kind == "H1_semi":
        gx = np.diff(f, axis=1) / grid.dx
        s = np.sum(gx * gx) * a
        if grid.ny > 1:
            gy = np.diff(f, axis=0) / grid.dy
            s += np.sum(gy * gy) * a
        return float(np.sqrt(s))
    raise DomainError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------- presets

def _side_values(grid, left=0.0, right=0.0, bottom=0.0, top=0.0):
    out = np.zeros(grid.n_bfaces)
    for side, val in zip(SIDES, (left, right, bottom, top)):
        out[grid.side_slice(side)] = val
    return out


def flood_preset(grid: StaggeredGrid, inflow_u: float = 1.0, speed: float = 1.0):
    """Left-to-right flood: inflow on the left, outflow on the right, no-slip walls."""
    b_n = _side_values(grid, left=-speed, right=speed)
    b_t = np.zeros(grid.n_bfaces)
    u_b = _side_values(grid, left=inflow_u)
    return BoundaryData.constant(u_b, b_n, b_t), np.zeros(grid.shape)


def lid_preset(grid: StaggeredGrid, lid_speed: float = 1.0):
    """Lid-driven cavity with a saturation step in the initial data."""
    b_n = np.zeros(grid.n_bfaces)
    b_t = _side_values(grid, top=lid_speed)
    u_b = np.zeros(grid.n_bfaces)
    X, _ = grid.cell_centers()
    u0 = np.where(X < 0.5 * grid.Lx, 1.0, 0.0)
    return BoundaryData.constant(u_b, b_n, b_t), u0


def quiescent_preset(grid: StaggeredGrid, level: float = 0.3):
    z = np.zeros(grid.n_bfaces)
    return BoundaryData.constant(np.full(grid.n_bfaces, level), z, z), np.full(grid.shape, level)


PRESETS = {"flood": flood_preset, "lid": lid_preset, "quiescent": quiescent_preset}


def load_boundary_csv(path, grid: StaggeredGrid) -> BoundaryData:
    """Read rows ``face,time,u_b,b_n,b_t`` (header required) into BoundaryData."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"face", "time", "u_b", "b_n", "b_t"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise StructuralError(f"{path}: header must contain {sorted(need)}")
        for r in reader:
            rows.append((int(r["face"]), float(r["time"]), float(r["u_b"]),
                         float(r["b_n"]), float(r["b_t"])))
    if not rows:
        raise StructuralError(f"{path}: no data rows")
    arr = np.array(rows)
    times = np.unique(arr[:, 1])
    nf = grid.n_bfaces
    out = np.full((3, times.size, nf), np.nan)
    ti = np.searchsorted(times, arr[:, 1])
    fi = arr[:, 0].astype(int)
    if fi.min() < 0 or fi.max() >= nf:
        raise StructuralError(f"{path}: face index out of range for {nf} boundary faces")
    out[:, ti, fi] = arr[:, 2:].T
    if np.isnan(out).any():
        raise StructuralError(f"{path}: every face needs a row at every time level")
    return BoundaryData(times, out[0], out[1], out[2])


def write_boundary_csv(path, bd: BoundaryData):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["face", "time", "u_b", "b_n", "b_t"])
        for k, t in enumerate(bd.times):
            for f in range(bd.n_faces):
                w.writerow([f, repr(float(t)), repr(float(bd.u_b[k, f])),
                            repr(float(bd.b_n[k, f])), repr(float(bd.b_t[k, f]))])


# ---------------------------------------------------------------- mollifier

def _hat_kernel(width_cells: float):
    r = int(np.ceil(width_cells))
    x = np.arange(-r, r + 1, dtype=float)
    k = np.maximum(1.0 - np.abs(x) / (width_cells + 1e-300), 0.0)
    return k / k.sum()


def mollify_cells(u, grid: StaggeredGrid, width: float | None = None):
    """Smooth a cell field with a hat kernel of half-width ``width`` (default 2 dx)."""
    width = 2.0 * grid.dx if width is None else width
    out = convolve1d(np.asarray(u, float), _hat_kernel(width / grid.dx), axis=1, mode="reflect")
    if grid.ny > 1:
        out = convolve1d(out, _hat_kernel(width / grid.dy), axis=0, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def mollify_boundary(bd: BoundaryData, grid: StaggeredGrid, width: float | None = None):
    """Smooth u_b along each side independently; velocities are untouched."""
    width = 2.0 * grid.dx if width is None else width
    u_b = bd.u_b.copy()
    for side in SIDES:
        sl = grid.side_slice(side)
        h = grid.dy if side in ("left", "right") else grid.dx
        if u_b[:, sl].shape[1] > 1:
            u_b[:, sl] = convolve1d(u_b[:, sl], _hat_kernel(width / h), axis=1, mode="nearest")
    return BoundaryData(bd.times, np.clip(u_b, 0.0, 1.0), bd.b_n, bd.b_t)
