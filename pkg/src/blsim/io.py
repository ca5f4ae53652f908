"""Result persistence: raw field dumps with a text sidecar, and CSV outputs.

Dumps are little-endian float64, row-major (y outer, x inner), one file per
field per stored level.  The sidecar lists the grid, the staggered shapes, the
byte order and one line per level; its first line is a timestamp, marked as
the only content that changes between reruns.
"""
from __future__ import annotations

import datetime as _dt
import math
from pathlib import Path

import numpy as np

from .errors import BLSimError, DataError
from .grid import BoundaryData, BoundarySnapshot, InitialData, StaggeredGrid, VelocityField, write_boundary_csv

DTYPE = np.dtype("<f8")
SIDECAR = "fields.txt"
TIMESTAMP_PREFIX = "# timestamp (varies between runs): "


class OutputError(BLSimError, OSError):
    """An output file could not be written."""


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


def write_csv(path, header, rows):
    """Comma-separated, '.' decimal point, header row, no trailing separator."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    _write_text(Path(path), "\n".join(lines) + "\n")


def read_csv(path):
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    return header, [line.split(",") for line in text[1:] if line]


# ---------------------------------------------------------------- raw fields

def write_field(path, array):
    a = np.ascontiguousarray(np.asarray(array, dtype=DTYPE))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        a.tofile(path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


def read_field(path, shape):
    path = Path(path)
    n = int(np.prod(shape))
    size = path.stat().st_size
    if size != 8 * n:
        raise DataError(f"{path} has {size} bytes, expected {8 * n} for shape {tuple(shape)}")
    return np.fromfile(path, dtype=DTYPE).reshape(shape)


def field_shapes(grid: StaggeredGrid) -> dict:
    return {"u": grid.shape, "vx": grid.vx_shape, "vy": grid.vy_shape, "p": grid.shape}


class FieldDumpWriter:
    """Writes levels under <outdir>/fields and keeps the sidecar current."""

    def __init__(self, outdir, grid: StaggeredGrid, timestamp: str | None = None):
        self.dir = Path(outdir) / "fields"
        self.grid = grid
        self.levels = []
        self.timestamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    def add(self, t: float, u, v: VelocityField | None = None):
        k = len(self.levels)
        names = []
        write_field(self.dir / f"u_{k:05d}.bin", u)
        names.append("u")
        if v is not None:
            write_field(self.dir / f"vx_{k:05d}.bin", v.vx)
            write_field(self.dir / f"vy_{k:05d}.bin", v.vy)
            names += ["vx", "vy"]
            if v.p is not None:
                write_field(self.dir / f"p_{k:05d}.bin", v.p)
                names.append("p")
        self.levels.append((k, float(t), tuple(names)))

    def sidecar_text(self) -> str:
        g = self.grid
        shp = field_shapes(g)
        lines = [TIMESTAMP_PREFIX + self.timestamp,
                 f"nx = {g.nx}", f"ny = {g.ny}", f"Lx = {_fmt(g.Lx)}", f"Ly = {_fmt(g.Ly)}",
                 f"dx = {_fmt(g.dx)}", f"dy = {_fmt(g.dy)}",
                 "dtype = float64", "byte_order = little",
                 "ordering = row-major, y outer, x inner"]
        lines += [f"shape.{k} = {s[0]}x{s[1]}" for k, s in shp.items()]
        lines.append("level_format = index,t,fields")
        lines += [f"level = {k},{_fmt(t)},{'+'.join(n)}" for k, t, n in self.levels]
        return "\n".join(lines) + "\n"

    def close(self):
        _write_text(self.dir / SIDECAR, self.sidecar_text())


def dump_trajectory(traj, outdir, timestamp: str | None = None) -> FieldDumpWriter:
    w = FieldDumpWriter(outdir, traj.grid, timestamp)
    for st in traj.states:
        w.add(st.t, st.u, st.v)
    w.close()
    return w


def read_sidecar(fields_dir) -> dict:
    path = Path(fields_dir) / SIDECAR
    if not path.exists():
        raise DataError(f"no sidecar at {path}")
    info = {"levels": []}
    for line in path.read_text().splitlines():
        if line.startswith("#") or "=" not in line:
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "level":
            k, t, names = val.split(",")
            info["levels"].append((int(k), float(t), tuple(names.split("+"))))
        else:
            info[key] = val
    return info


def load_dump(outdir):
    """(grid, [(t, fields dict)]) from a dump directory; checks byte lengths."""
    fdir = Path(outdir) / "fields"
    info = read_sidecar(fdir)
    grid = StaggeredGrid(int(info["nx"]), int(info["ny"]), float(info["Lx"]), float(info["Ly"]))
    shp = field_shapes(grid)
    for k, s in shp.items():
        declared = tuple(int(x) for x in info[f"shape.{k}"].split("x"))
        if declared != s:
            raise DataError(f"sidecar shape for {k} is {declared}, grid gives {s}")
    levels = []
    for k, t, names in info["levels"]:
        levels.append((t, {n: read_field(fdir / f"{n}_{k:05d}.bin", shp[n]) for n in names}))
    return grid, levels


# ---------------------------------------------------------------- reports

def write_report(path, report):
    write_csv(path, report.columns, report.rows)


def write_study(outdir, study):
    outdir = Path(outdir)
    rows = study.rows
    if not rows:
        raise DataError("empty study report")
    header = list(rows[0].keys())
    write_csv(outdir / "study.csv", header,
              [[("true" if r[h] else "false") if isinstance(r[h], bool) else r[h] for h in header]
               for r in rows])
    lines = []
    if study.slope is not None:
        lines.append(f"slope = {_fmt(study.slope)}")
    _write_text(outdir / "fit.txt", "\n".join(lines) + ("\n" if lines else ""))


def write_certificate(path, cert):
    write_csv(path, ("name", "v", "value", "bound", "pass", "location"),
              [(n, v, val, b, "true" if p else "false", loc) for n, v, val, b, p, loc in cert.rows])


def write_solver_trace(path, rows):
    write_csv(path, ("iteration", "momentum_residual", "div_residual"),
              [(float(i), m, d) for i, m, d in rows])


def write_measures(outdir, measure, grid: StaggeredGrid):
    """Per-v time-summed cell densities of m+ and m- with a sidecar."""
    mdir = Path(outdir) / "measures"
    if measure.cells_plus is None:
        raise DataError("measure has no cellwise data")
    lines = [f"nx = {grid.nx}", f"ny = {grid.ny}", "dtype = float64", "byte_order = little",
             "ordering = row-major, y outer, x inner; summed over time steps"]
    for j, v in enumerate(measure.v):
        write_field(mdir / f"m_plus_{j:03d}.bin", measure.cells_plus[j])
        write_field(mdir / f"m_minus_{j:03d}.bin", measure.cells_minus[j])
        lines.append(f"v = {j},{_fmt(v)}")
    _write_text(mdir / "measures.txt", "\n".join(lines) + "\n")


def write_run_outputs(outdir, traj, timestamp: str | None = None):
    """report.csv, fields/ and boundary.csv for a finished or aborted run."""
    outdir = Path(outdir)
    write_report(outdir / "report.csv", traj.report)
    dump_trajectory(traj, outdir, timestamp)
    write_boundary_csv(outdir / "boundary.csv", traj.boundary)
    write_field(outdir / "u0.bin", traj.initial.u0)


def load_run(outdir, parsed):
    """Rebuild a Trajectory from a run directory written by write_run_outputs."""
    from .driver import StepState, Trajectory, model_for
    from .stokes import mac_operators
    from .grid import load_boundary_csv
    outdir = Path(outdir)
    cfg = parsed.run
    grid, levels = load_dump(outdir)
    if grid != cfg.grid:
        raise DataError("dumped grid does not match the echoed configuration")
    boundary = load_boundary_csv(outdir / "boundary.csv", grid)
    model = model_for(cfg)
    ops = mac_operators(grid)
    states = []
    prev = None
    for k, (t, f) in enumerate(levels):
        if "vx" not in f:
            raise DataError(f"level {k} lacks velocity dumps")
        v = VelocityField(f["vx"], f["vy"], f.get("p"))
        b = boundary.at(t)
        b = BoundarySnapshot(t, b.u_b, b.b_n, b.b_t)
        tv, tb = (v, b) if cfg.splitting == "velocity_first" else \
            ((prev.v, prev.bsnap) if prev is not None else (None, None))
        u = f["u"]
        st = StepState(k, t, 0.0 if prev is None else t - prev.t, u, float(u.min()), float(u.max()),
                       v, ops.wall_values(b.b_t), b, model.h(u if prev is None else prev.u), tv, tb)
        states.append(st)
        prev = st
    dense = cfg.output_dt == 0
    traj = Trajectory(cfg, model, boundary, InitialData(states[0].u, states[0].v), states,
                      [s.dt for s in states[1:]], dense=dense, complete=True)
    return traj
