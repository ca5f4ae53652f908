"""Plain key=value run configuration.

Keys are grouped by dotted prefixes; '#' starts a comment.  Numbers are
parsed with a fixed grammar (decimal point only), so results never depend on
the process locale.  ``echo`` writes every effective key in canonical form and
parsing the echo reproduces the same configuration exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .driver import RunConfig
from .errors import BLSimError, ConfigError
from .grid import StaggeredGrid
from .model import FluidParams, RelPermModel
from .stokes import SolverSettings
from .transport import TransportSettings

_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_INT = re.compile(r"^[+-]?\d+$")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}

# key -> (type, default); None default with required=True marks required keys
SCHEMA = {
    "grid.nx": ("int", None),
    "grid.ny": ("int", None),  # defaults to grid.nx
    "grid.Lx": ("float", 1.0),
    "grid.Ly": ("float", 1.0),
    "fluid.mu1": ("float", 1.0),
    "fluid.mu2": ("float", 1.0),
    "fluid.nu": ("float", 0.1),
    "fluid.tau": ("float", 1e-3),
    "rel_perm.kind": ("str", "corey_quadratic"),
    "rel_perm.exponent": ("float", 2.0),
    "rel_perm.k_reg": ("float", 1e-8),
    "rel_perm.table_file": ("str", ""),
    "flux.mode": ("str", "simple"),
    "transport.epsilon": ("float", 0.0),
    "transport.cfl": ("float", 0.5),
    "transport.scheme": ("str", "upwind_monotone"),
    "transport.mollify_data": ("bool", False),
    "transport.dt_max": ("float", 1e-2),
    "solver.tolerance": ("float", 1e-10),
    "solver.max_iterations": ("int", 500),
    "solver.uzawa_step": ("step", "auto"),
    "solver.method": ("str", "nullspace"),
    "solver.refactor_iterations": ("int", 8),
    "run.T": ("float", None),
    "run.output_dt": ("float", 0.0),
    "run.seed": ("int", 0),
    "run.preset": ("str", "flood"),
    "run.boundary_file": ("str", ""),
    "run.splitting": ("str", "velocity_first"),
    "run.picard_iterations": ("int", 0),
    "run.picard_tol": ("float", 1e-8),
    "run.grade_initial_layer": ("bool", True),
    "run.max_steps": ("int", 1_000_000),
    "study.epsilons": ("list", ()),
    "study.taus": ("list", ()),
    "study.workers": ("int", 1),
    "study.samples": ("int", 41),
}
REQUIRED = ("grid.nx", "run.T")

# simple range checks applied with the line number of the offending key
RANGES = {
    "grid.nx": (lambda x: x >= 4, "grid.nx must be ≥ 4"),
    "grid.ny": (lambda x: x >= 4 or x == 1, "grid.ny must be ≥ 4 (or 1 for a slice)"),
    "grid.Lx": (lambda x: x > 0, "grid.Lx must be positive"),
    "grid.Ly": (lambda x: x > 0, "grid.Ly must be positive"),
    "fluid.mu1": (lambda x: x > 0, "fluid.mu1 must be positive"),
    "fluid.mu2": (lambda x: x > 0, "fluid.mu2 must be positive"),
    "fluid.nu": (lambda x: x > 0, "fluid.nu must be positive"),
    "fluid.tau": (lambda x: x >= 0, "fluid.tau must be ≥ 0"),
    "rel_perm.k_reg": (lambda x: x > 0, "rel_perm.k_reg must be positive"),
    "transport.epsilon": (lambda x: x >= 0, "transport.epsilon must be ≥ 0"),
    "transport.cfl": (lambda x: 0 < x <= 1, "transport.cfl must lie in (0, 1]"),
    "transport.dt_max": (lambda x: x > 0, "transport.dt_max must be positive"),
    "solver.tolerance": (lambda x: x > 0, "solver.tolerance must be positive"),
    "solver.max_iterations": (lambda x: x >= 1, "solver.max_iterations must be ≥ 1"),
    "run.T": (lambda x: x > 0, "run.T must be positive"),
    "run.output_dt": (lambda x: x >= 0, "run.output_dt must be ≥ 0"),
    "run.picard_iterations": (lambda x: 0 <= x <= 5, "run.picard_iterations must lie in [0, 5]"),
    "study.workers": (lambda x: x >= 1, "study.workers must be ≥ 1"),
    "study.samples": (lambda x: x >= 2, "study.samples must be ≥ 2"),
}


@dataclass(frozen=True)
class StudyParams:
    epsilons: tuple = ()
    taus: tuple = ()
    workers: int = 1
    samples: int = 41


@dataclass(frozen=True)
class ParsedConfig:
    run: RunConfig
    study: StudyParams
    values: dict  # effective key -> typed value
    source: str = ""

    def __eq__(self, other):
        return isinstance(other, ParsedConfig) and self.run == other.run and \
            self.study == other.study and self.values == other.values

    def __hash__(self):
        return hash((self.run, self.study))


def _number(text, kind, key, lineno):
    if kind == "int":
        if not _INT.match(text):
            raise ConfigError(f"malformed integer for {key}: {text!r}", lineno)
        return int(text)
    if not _FLOAT.match(text):
        raise ConfigError(f"malformed number for {key}: {text!r}", lineno)
    return float(text)


def _convert(key, text, lineno):
    kind, _ = SCHEMA[key]
    if kind in ("int", "float"):
        return _number(text, kind, key, lineno)
    if kind == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"malformed boolean for {key}: {text!r}", lineno)
    if kind == "step":
        return "auto" if text == "auto" else _number(text, "float", key, lineno)
    if kind == "list":
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(_number(t, "float", key, lineno) for t in items)
    return text


def parse_text(text: str, source: str = "<string>") -> ParsedConfig:
    seen: dict = {}
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} on lines {seen[key]} and {lineno}", lineno)
        seen[key] = lineno
        raw[key] = _convert(key, value, lineno)
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    values = {k: raw.get(k, d) for k, (_, d) in SCHEMA.items()}
    if "grid.ny" not in raw:
        values["grid.ny"] = values["grid.nx"]
    for key, (ok, msg) in RANGES.items():
        if not ok(values[key]):
            raise ConfigError(msg, seen.get(key))
    try:
        run = _build(values)
    except ConfigError:
        raise
    except BLSimError as exc:
        line = next((ln for k, ln in seen.items() if k.split(".")[-1] in str(exc)), None)
        raise ConfigError(str(exc), line) from exc
    study = StudyParams(values["study.epsilons"], values["study.taus"], values["study.workers"],
                        values["study.samples"])
    return ParsedConfig(run, study, values, source)


def _read_table(path):
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body or body[0].isalpha():
            continue
        parts = [p.strip() for p in body.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{path}: expected s,kr1,kr2", lineno)
        rows.append(tuple(_number(p, "float", "rel_perm.table_file", lineno) for p in parts))
    return tuple(rows)


def _build(v: dict) -> RunConfig:
    table = _read_table(v["rel_perm.table_file"]) if v["rel_perm.table_file"] else None
    return RunConfig(
        grid=StaggeredGrid(v["grid.nx"], v["grid.ny"], v["grid.Lx"], v["grid.Ly"]),
        fluid=FluidParams(v["fluid.mu1"], v["fluid.mu2"], v["fluid.nu"], v["fluid.tau"]),
        relperm=RelPermModel(v["rel_perm.kind"], v["rel_perm.exponent"], table, v["rel_perm.k_reg"]),
        flux_mode=v["flux.mode"],
        transport=TransportSettings(v["transport.epsilon"], v["transport.cfl"], v["transport.scheme"],
                                    v["transport.mollify_data"], v["transport.dt_max"]),
        solver=SolverSettings(v["solver.max_iterations"], v["solver.tolerance"], v["solver.uzawa_step"],
                              v["solver.method"], v["solver.refactor_iterations"]),
        T=v["run.T"],
        output_dt=v["run.output_dt"],
        seed=v["run.seed"],
        preset=v["run.preset"],
        boundary_file=v["run.boundary_file"] or None,
        splitting=v["run.splitting"],
        picard_iterations=v["run.picard_iterations"],
        picard_tol=v["run.picard_tol"],
        grade_initial_layer=v["run.grade_initial_layer"],
        max_steps=v["run.max_steps"],
    )


def parse_config(path) -> ParsedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_text(text, str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    return str(value)


def echo(cfg: ParsedConfig) -> str:
    """Every effective key, one per line, in schema order."""
    lines = ["# effective configuration"]
    lines += [f"{k} = {_fmt(cfg.values[k])}" for k in SCHEMA]
    return "\n".join(lines) + "\n"


def write_echo(cfg: ParsedConfig, outdir) -> Path:
    out = Path(outdir) / "config.echo"
    out.write_text(echo(cfg))
    return out
