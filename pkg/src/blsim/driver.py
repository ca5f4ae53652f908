"""Coupled time loop for saturation and velocity, energy reporting and studies.

Each step lags the damping: h(u^n) feeds the velocity solve at t^{n+1}, then
the saturation is advanced with the new velocity (``velocity_first``) or the
order is swapped (``transport_first``).  Diagnostics that need every step but
not every field (entropy production, weak residuals, the tau-study distance)
are computed by observers that see each step as it happens.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import BLSimError, CFLError, ConfigError, DataError, DomainError, NumericError
from .grid import (PRESETS, BoundaryData, BoundarySnapshot, InitialData, StaggeredGrid,
                   VelocityField, load_boundary_csv, mollify_boundary, mollify_cells, norms,
                   validate_data)
from .model import FluidParams, FluxModel, RelPermModel, build_flux_model
from .stokes import BrinkmanSolver, SolverSettings, mac_operators
from .transport import TransportSettings, stable_dt, step_saturation

log = logging.getLogger(__name__)

SPLITTINGS = ("velocity_first", "transport_first")
REPORT_COLUMNS = ("t", "min_u", "max_u", "sqrt_tau_v_L2", "v_L2V1_running",
                  "eps_gradu_running", "vneg1_proxy")
CFL_RETRIES = 8
LAYER_FRACTION = 0.1  # first step is this fraction of tau when grading the initial layer
LAYER_GROWTH = 1.25


@dataclass(frozen=True)
class RunConfig:
    grid: StaggeredGrid = StaggeredGrid(64, 64)
    fluid: FluidParams = FluidParams()
    relperm: RelPermModel = RelPermModel()
    flux_mode: str = "simple"
    transport: TransportSettings = TransportSettings()
    solver: SolverSettings = SolverSettings()
    T: float = 0.5
    output_dt: float = 0.0  # 0 stores every step
    seed: int = 0
    preset: str = "flood"
    boundary_file: str | None = None
    splitting: str = "velocity_first"
    picard_iterations: int = 0
    picard_tol: float = 1e-8
    grade_initial_layer: bool = True
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError("run.T must be positive")
        if not self.output_dt >= 0:
            raise ConfigError("run.output_dt must be nonnegative")
        if self.splitting not in SPLITTINGS:
            raise ConfigError(f"unknown run.splitting {self.splitting!r}")
        if not 0 <= self.picard_iterations <= 5:
            raise ConfigError("run.picard_iterations must lie in [0, 5]")
        if self.preset not in (*PRESETS, "random", "file"):
            raise ConfigError(f"unknown run.preset {self.preset!r}")
        if self.preset == "file" and not self.boundary_file:
            raise ConfigError("run.preset=file needs run.boundary_file")

    @property
    def tau(self) -> float:
        return self.fluid.tau

    @property
    def epsilon(self) -> float:
        return self.transport.epsilon

    def with_tau(self, tau: float) -> "RunConfig":
        return replace(self, fluid=replace(self.fluid, tau=float(tau)))

    def with_epsilon(self, eps: float) -> "RunConfig":
        return replace(self, transport=replace(self.transport, epsilon=float(eps)))


@lru_cache(maxsize=16)
def build_model(fluid: FluidParams, relperm: RelPermModel, mode: str) -> FluxModel:
    return build_flux_model(fluid, relperm, mode)


def model_for(config: RunConfig) -> FluxModel:
    return build_model(config.fluid, config.relperm, config.flux_mode)


# ---------------------------------------------------------------- data

def random_data(grid: StaggeredGrid, rng: np.random.Generator, T: float = 1.0):
    """Smooth random admissible data with zero net boundary flux, two time levels."""
    c = grid.bface_center
    s = c[:, 0] + c[:, 1]
    levels = []
    for _ in range(2):
        k = rng.integers(1, 4, size=3)
        a = rng.normal(size=3)
        ph = rng.uniform(0, 2 * np.pi, size=3)
        b_n = sum(a[i] * np.sin(2 * np.pi * k[i] * s + ph[i]) for i in range(3))
        b_n = b_n - np.sum(b_n * grid.bface_length) / grid.perimeter
        b_t = 0.5 * rng.normal() * np.cos(2 * np.pi * s + rng.uniform(0, 2 * np.pi))
        lo, hi = np.sort(rng.uniform(0, 1, size=2))
        u_b = lo + (hi - lo) * 0.5 * (1 + np.sin(2 * np.pi * rng.integers(1, 3) * s + rng.uniform(0, 6)))
        levels.append((u_b, b_n, b_t))
    bd = BoundaryData(np.array([0.0, T]), *[np.stack([lv[i] for lv in levels]) for i in range(3)])
    X, Y = grid.cell_centers()
    kx, ky = rng.integers(1, 4, size=2)
    u0 = 0.5 + 0.5 * np.sin(2 * np.pi * kx * X + rng.uniform(0, 6)) * np.cos(2 * np.pi * ky * Y)
    u0 = np.clip(u0 * rng.uniform(0.5, 1.0), 0.0, 1.0)
    return bd, u0


def build_data(config: RunConfig):
    """(BoundaryData, u0) for the configured preset, CSV file or random seed."""
    grid = config.grid
    if config.preset == "file":
        bd = load_boundary_csv(config.boundary_file, grid)
        u0 = np.zeros(grid.shape)
    elif config.preset == "random":
        bd, u0 = random_data(grid, np.random.default_rng(config.seed), config.T)
    else:
        bd, u0 = PRESETS[config.preset](grid)
    if config.transport.mollify_data:
        u0 = mollify_cells(u0, grid)
        bd = mollify_boundary(bd, grid)
    return bd, u0


# ---------------------------------------------------------------- containers

@dataclass(frozen=True, eq=False)
class StepState:
    """One time level plus the velocity and boundary data used to reach it."""

    index: int
    t: float
    dt: float
    u: np.ndarray
    raw_min: float
    raw_max: float
    v: VelocityField
    wall: np.ndarray
    bsnap: BoundarySnapshot
    h_cell: np.ndarray
    transport_v: VelocityField | None = None
    transport_b: BoundarySnapshot | None = None


@dataclass
class EnergyReport:
    rows: list = field(default_factory=list)

    columns = REPORT_COLUMNS

    def add(self, *values):
        self.rows.append(tuple(float(x) for x in values))

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(self.columns))

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def final(self) -> dict:
        """Last row, except min_u (running minimum) and max_u (running maximum)."""
        a = self.as_array()
        out = dict(zip(self.columns, a[-1]))
        out["min_u"] = float(a[:, 1].min())
        out["max_u"] = float(a[:, 2].max())
        return out


@dataclass
class Trajectory:
    config: RunConfig
    model: FluxModel
    boundary: BoundaryData
    initial: InitialData
    states: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    report: EnergyReport = field(default_factory=EnergyReport)
    solver_trace: list = field(default_factory=list)
    dense: bool = True
    complete: bool = False

    @property
    def grid(self) -> StaggeredGrid:
        return self.config.grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def u(self) -> list:
        return [s.u for s in self.states]

    @property
    def v(self) -> list:
        return [s.v for s in self.states]

    def steps(self):
        """Consecutive (previous, new) level pairs; requires every step stored."""
        if not self.dense:
            raise DataError("trajectory was stored at an output cadence, not every step")
        return zip(self.states[:-1], self.states[1:])


class Observer:
    """Hooks called by the time loop; subclasses accumulate diagnostics."""

    def start(self, state: StepState, traj: Trajectory):
        pass

    def step(self, prev: StepState, new: StepState, traj: Trajectory):
        pass

    def finish(self, traj: Trajectory):
        pass


def replay(traj: Trajectory, observers):
    """Feed a stored dense trajectory through observers, as the live loop would."""
    observers = list(observers)
    for ob in observers:
        ob.start(traj.states[0], traj)
    for prev, new in traj.steps():
        for ob in observers:
            ob.step(prev, new, traj)
    for ob in observers:
        ob.finish(traj)
    return observers


# ---------------------------------------------------------------- time loop

class _Energy:
    """Running a-priori quantities; rows are emitted at stored levels."""

    def __init__(self, grid, tau, eps):
        self.ops = mac_operators(grid)
        self.grid = grid
        self.tau, self.eps = tau, eps
        self.sup_v = 0.0
        self.v_sq = 0.0
        self.gradu_sq = 0.0
        self.dual_sq = 0.0
        self.min_u = np.inf
        self.max_u = -np.inf

    def level(self, st: StepState, prev: StepState | None):
        ops = self.ops
        z = ops.to_z(st.v, st.wall)
        l2 = ops.l2_sq(z)
        self.sup_v = max(self.sup_v, math.sqrt(self.tau * l2))
        self.min_u = min(self.min_u, st.raw_min)
        self.max_u = max(self.max_u, st.raw_max)
        if prev is not None:
            dt = st.dt
            self.v_sq += dt * (l2 + ops.grad_sq(z))
            if self.eps > 0:
                self.gradu_sq += dt * norms(st.u, self.grid, "H1_semi") ** 2
            if self.tau > 0:
                d = ops.faces_to_interior(st.v.vx - prev.v.vx, st.v.vy - prev.v.vy) / dt
                self.dual_sq += dt * ops.riesz_dual_sq(d)

    def row(self, t):
        return (t, self.min_u, self.max_u, self.sup_v, math.sqrt(self.v_sq),
                self.eps * self.gradu_sq, self.tau * math.sqrt(self.dual_sq))


class _Stepper:
    def __init__(self, config: RunConfig, model: FluxModel, boundary: BoundaryData, trace=False):
        self.c = config
        self.model = model
        self.boundary = boundary
        self.grid = config.grid
        self.solver = BrinkmanSolver(config.grid, config.fluid.nu, config.solver)
        self.ops = self.solver.ops
        self.trace = trace
        self.traces = []

    def velocity(self, h_cell, bsnap, v_prev, dt):
        ops, tau = self.ops, self.c.tau
        HI = ops.cell_to_interior_faces(h_cell)
        fI = None
        if tau > 0 and v_prev is not None:
            HI = HI + tau / dt
            fI = (tau / dt) * ops.faces_to_interior(v_prev.vx, v_prev.vy)
        v, wall = self.solver.solve(HI, bsnap, fI, trace=self.trace)
        if self.trace:
            self.traces.extend((len(self.traces), *row) for row in self.solver.info.trace)
        return v, wall

    def transport(self, u, v, bsnap, dt):
        return step_saturation(u, v, bsnap, self.model, self.c.transport, dt, self.grid)

    def stable(self, u, v):
        return stable_dt(u, v, self.model, self.c.transport, self.grid)


def initial_state(config: RunConfig, model: FluxModel, boundary: BoundaryData, u0,
                  stepper: _Stepper, v0: VelocityField | None = None) -> StepState:
    """Level 0: lifting (tau > 0, unless v0 given) or quasi-stationary field (tau = 0)."""
    b0 = boundary.at(0.0)
    h0 = model.h(u0)
    if config.tau > 0:
        if v0 is None:
            HI = np.zeros(stepper.ops.I.size)
            v0, wall = stepper.solver.solve(HI, b0)
        else:
            wall = stepper.ops.wall_values(b0.b_t)
    else:
        v0, wall = stepper.velocity(h0, b0, None, 1.0)
    u0 = np.asarray(u0, dtype=float)
    return StepState(0, 0.0, 0.0, u0, float(u0.min()), float(u0.max()), v0, wall, b0, h0)


def _check_data(config, boundary, u0, v0):
    rep = validate_data(config.grid, boundary, InitialData(u0, v0), config.tau)
    if not rep.ok:
        raise DataError(f"invalid data:\n{rep}", report=rep)


def run(config: RunConfig, boundary: BoundaryData | None = None, u0=None,
        v0: VelocityField | None = None, observers=(), store: bool = True,
        trace_solver: bool = False) -> Trajectory:
    """Integrate the coupled system to config.T.

    Levels are stored every step when config.output_dt == 0, else at the
    output times (which the step sequence hits exactly).  With store=False
    only the first and last level are kept and observers do the work.
    """
    if boundary is None:
        boundary, u_default = build_data(config)
        u0 = u_default if u0 is None else u0
    if u0 is None:
        raise DataError("initial saturation missing")
    model = model_for(config)
    grid = config.grid
    tau, T = config.tau, config.T
    stepper = _Stepper(config, model, boundary, trace_solver)
    # bounds and net flux first, so the initial velocity solve sees admissible data
    _check_data(replace(config, fluid=replace(config.fluid, tau=0.0)), boundary, u0, None)
    st0 = initial_state(config, model, boundary, u0, stepper, v0)
    _check_data(config, boundary, st0.u, st0.v if tau > 0 else None)
    traj = Trajectory(config, model, boundary, InitialData(st0.u, st0.v if tau > 0 else None),
                      dense=store and config.output_dt == 0)
    energy = _Energy(grid, tau, config.epsilon)
    energy.level(st0, None)
    traj.report.add(*energy.row(0.0))
    traj.states.append(st0)
    observers = list(observers)
    for ob in observers:
        ob.start(st0, traj)

    out_dt = config.output_dt
    dense = out_dt == 0
    out_index = 1
    next_out = None if dense else min(out_dt, T)
    cur = st0
    step = 0
    layer_cap = LAYER_FRACTION * tau if tau > 0 and config.grade_initial_layer else None
    try:
        while cur.t < T * (1 - 1e-13):
            if step >= config.max_steps:
                raise NumericError(f"step limit {config.max_steps} reached at t={cur.t:.6g}")
            cap = T - cur.t
            if next_out is not None:
                cap = min(cap, next_out - cur.t)
            if layer_cap is not None:
                cap = min(cap, layer_cap)
                layer_cap = layer_cap * LAYER_GROWTH if layer_cap < T else None
            new = _advance(stepper, cur, cap, step)
            traj.dts.append(new.dt)
            energy.level(new, cur)
            for ob in observers:
                ob.step(cur, new, traj)
            hit_out = next_out is not None and abs(new.t - next_out) <= 1e-12 * max(1.0, T)
            last = new.t >= T * (1 - 1e-13)
            if (store and (dense or hit_out)) or last:
                traj.states.append(new)
                traj.report.add(*energy.row(new.t))
            if hit_out:
                # output times are k * output_dt, computed without accumulation
                out_index += 1
                next_out = min(out_index * out_dt, T)
                if next_out < new.t + 1e-12 * max(1.0, T):
                    next_out = T
            cur = new
            step += 1
    except BLSimError as exc:
        if traj.states[-1] is not cur:
            traj.states.append(cur)
        exc.trajectory = traj
        raise
    traj.solver_trace = stepper.traces
    traj.complete = True
    for ob in observers:
        ob.finish(traj)
    return traj


def _advance(stepper: _Stepper, cur: StepState, cap: float, index: int) -> StepState:
    c = stepper.c
    model = stepper.model
    h_cur = model.h(cur.u)
    if c.splitting == "transport_first":
        dt = min(stepper.stable(cur.u, cur.v), cap)
        sat = stepper.transport(cur.u, cur.v, cur.bsnap, dt)
        t1 = cur.t + dt
        b1 = stepper.boundary.at(t1)
        h1 = model.h(sat.u)
        v1, wall = stepper.velocity(h1, b1, cur.v, dt)
        return StepState(index + 1, t1, dt, sat.u, sat.raw_min, sat.raw_max, v1, wall, b1, h1,
                         cur.v, cur.bsnap)

    dt = min(stepper.stable(cur.u, cur.v), cap)
    for _ in range(CFL_RETRIES):
        t1 = cur.t + dt
        b1 = stepper.boundary.at(t1)
        v1, wall = stepper.velocity(h_cur, b1, cur.v, dt)
        bound = stepper.stable(cur.u, v1)
        if dt <= bound * (1 + 1e-12):
            break
        dt = min(bound, cap)
    else:
        raise CFLError(dt, bound)
    sat = stepper.transport(cur.u, v1, b1, dt)
    h_used = h_cur
    for _ in range(c.picard_iterations):
        h_used = model.h(sat.u)
        v1, wall = stepper.velocity(h_used, b1, cur.v, dt)
        new = step_saturation(cur.u, v1, b1, model, c.transport, dt, stepper.grid, check_dt=False)
        change = float(np.max(np.abs(new.u - sat.u)))
        sat = new
        if change <= c.picard_tol:
            break
    return StepState(index + 1, t1, dt, sat.u, sat.raw_min, sat.raw_max, v1, wall, b1, h_used,
                     v1, b1)


def run_ibvp_tau(config: RunConfig, **kw) -> Trajectory:
    if not config.tau > 0:
        raise DomainError("run_ibvp_tau needs fluid.tau > 0")
    return run(config, **kw)


def run_ibvp_stationary(config: RunConfig, **kw) -> Trajectory:
    if config.tau != 0:
        raise DomainError("run_ibvp_stationary needs fluid.tau = 0")
    return run(config, **kw)


# ---------------------------------------------------------------- studies

def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def l1_space_time(a_levels, b_levels, times, grid: StaggeredGrid) -> float:
    """Trapezoidal L1(Omega_T) distance between two level sequences on common times."""
    d = np.array([np.sum(np.abs(a - b)) * grid.cell_area for a, b in zip(a_levels, b_levels)])
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(times)))


def resolution_floor(config: RunConfig, vmax: float) -> float:
    """Smallest epsilon not swamped by the grid: dx * max|v| * K."""
    g = config.grid
    h = g.dx if g.ny == 1 else max(g.dx, g.dy)
    return h * vmax * model_for(config).K


def _eps_member(args):
    from .kinetic import EntropyProductionObserver, VGrid  # noqa: deferred to keep import order simple
    config, vgrid_values, data = args
    obs = EntropyProductionObserver(VGrid(np.asarray(vgrid_values)), keep_cells=False)
    boundary, u0 = data if data is not None else (None, None)
    traj = run(config, boundary=boundary, u0=u0, observers=[obs])
    vmax = max(s.v.max_abs() for s in traj.states)
    return {
        "epsilon": config.epsilon,
        "times": traj.times,
        "u": [s.u for s in traj.states],
        "report": traj.report.final(),
        "report_rows": traj.report.as_array(),
        "vmax": vmax,
        "m_estimate": obs.estimate_rows(),
        "m_min": obs.min_scaled(),
    }


@dataclass
class StudyReport:
    parameter: str
    values: list
    rows: list  # one dict per parameter value, in the order given
    differences: list = field(default_factory=list)
    slope: float | None = None
    warnings: list = field(default_factory=list)


def epsilon_study(config: RunConfig, epsilons, workers: int = 1, samples: int = 41,
                  vgrid_values=None, data=None) -> StudyReport:
    """Runs each epsilon on the same grid and cadence; Cauchy L1(Omega_T) differences.

    ``data`` optionally overrides the configured preset with (BoundaryData, u0).
    """
    from .kinetic import default_vgrid
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps):
        raise DomainError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilons must be strictly decreasing")
    cfg = replace(config, output_dt=config.T / (samples - 1))
    vg = default_vgrid().values if vgrid_values is None else np.asarray(vgrid_values, float)
    members = _map(_eps_member, [(cfg.with_epsilon(e), vg, data) for e in eps], workers)
    rep = StudyReport("epsilon", eps, [])
    for m in members:
        floor = resolution_floor(cfg, m["vmax"])
        row = {"epsilon": m["epsilon"], **{k: m["report"][k] for k in REPORT_COLUMNS[1:]},
               "resolution_floor": floor, "under_resolved": m["epsilon"] < floor,
               "m_estimate_margin": min(r[3] for r in m["m_estimate"]),
               "m_min_scaled": m["m_min"]}
        if row["under_resolved"]:
            msg = f"epsilon={m['epsilon']:g} is below the grid floor {floor:.3g}"
            log.warning(msg)
            rep.warnings.append(msg)
        rep.rows.append(row)
    for a, b in zip(members, members[1:]):
        if len(a["times"]) != len(b["times"]) or np.max(np.abs(a["times"] - b["times"])) > 1e-12:
            raise DataError("epsilon runs did not produce matching output times")
        rep.differences.append(l1_space_time(a["u"], b["u"], a["times"], cfg.grid))
    for row, d in zip(rep.rows, [np.nan] + rep.differences):
        row["cauchy_l1"] = d
    return rep


class BTauObserver(Observer):
    """Accumulates D = sum dt ||v - B||_V1^2 with B the quasi-stationary field.

    B at t^{n+1} uses the same damping h and boundary data as the step that
    produced v^{n+1}, so the difference isolates the time-delay term.
    """

    def __init__(self, config: RunConfig):
        self.solver = BrinkmanSolver(config.grid, config.fluid.nu, config.solver)
        self.ops = self.solver.ops
        self.D = 0.0
        self.B_sq = 0.0
        self.B_sup = 0.0
        self.dB_sq = 0.0
        self.B_prev = None

    def _solve(self, h, b):
        v, wall = self.solver.solve(self.ops.cell_to_interior_faces(h), b, compute_pressure=False)
        return self.ops.to_z(v, wall)

    def _v1(self, z):
        return self.ops.l2_sq(z) + self.ops.grad_sq(z)

    def start(self, state, traj):
        self.B_prev = self._solve(state.h_cell, state.bsnap)
        self.B_sup = math.sqrt(self._v1(self.B_prev))

    def step(self, prev, new, traj):
        zB = self._solve(new.h_cell, new.bsnap)
        zv = self.ops.to_z(new.v, new.wall)
        self.D += new.dt * self._v1(zv - zB)
        nB = self._v1(zB)
        self.B_sq += new.dt * nB
        self.B_sup = max(self.B_sup, math.sqrt(nB))
        self.dB_sq += new.dt * self.ops.l2_sq((zB - self.B_prev) / new.dt)
        self.B_prev = zB


def _tau_member(config: RunConfig):
    obs = BTauObserver(config)
    traj = run(config, observers=[obs], store=False)
    return {"tau": config.tau, "D": obs.D, "B_L2V1": math.sqrt(obs.B_sq), "B_sup_V1": obs.B_sup,
            "dtB_L2L2": math.sqrt(obs.dB_sq), "report": traj.report.final(),
            "steps": len(traj.dts)}


def fit_slope(x, y):
    """Least-squares slope of log y against log x over positive entries."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if np.count_nonzero(ok) < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def tau_study(config: RunConfig, taus, workers: int = 1) -> StudyReport:
    taus = [float(t) for t in taus]
    if any(t <= 0 for t in taus):
        raise DomainError("taus must be positive")
    members = _map(_tau_member, [config.with_tau(t) for t in taus], workers)
    rep = StudyReport("tau", taus, [])
    for m in members:
        rep.rows.append({"tau": m["tau"], "D": m["D"], "B_L2V1": m["B_L2V1"],
                         "B_sup_V1": m["B_sup_V1"], "dtB_L2L2": m["dtB_L2L2"],
                         "steps": m["steps"],
                         **{k: m["report"][k] for k in REPORT_COLUMNS[1:]}})
    if len(taus) >= 2:
        rep.slope = fit_slope(taus, [r["D"] for r in rep.rows])
    if rep.slope is None and len(taus) >= 2:
        rep.warnings.append("fewer than two usable points, no slope fitted")
    return rep


def uniform_bound_check(rows, parameter: str, columns=REPORT_COLUMNS[3:], rel: float = 0.1):
    """Per column: values at parameters at or below the second value stay within rel of it.

    Returns {column: (passed, worst one-sided excess, two-sided spread)}.  The
    one-sided test bounds each series by the value at the second parameter;
    the two-sided spread is reported for information.
    """
    if len(rows) < 2:
        return {}
    ref_param = rows[1][parameter]
    sub = [r for r in rows if r[parameter] <= ref_param]
    out = {}
    for col in columns:
        ref = rows[1][col]
        vals = np.array([r[col] for r in sub])
        scale = max(abs(ref), 1e-300)
        excess = float(np.max(vals - ref) / scale)
        spread = float((vals.max() - vals.min()) / scale) if ref != 0 else float(vals.max() - vals.min())
        out[col] = (excess <= rel, excess, spread)
    return out
