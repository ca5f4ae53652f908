"""Command-line entry point ``blsim``.

Exit codes: 0 all checks pass, 1 usage or configuration error, 2 numerical
failure, 3 certification failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .config import parse_config, write_echo
from .driver import (REPORT_COLUMNS, model_for, run, epsilon_study, tau_study,
                     uniform_bound_check)
from .errors import BLSimError, ConfigError, NumericError
from .grid import discrete_divergence

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CERT = 0, 1, 2, 3
MAX_PRINCIPLE_TOL = 1e-12
DIVERGENCE_TOL = 1e-9

log = logging.getLogger("blsim")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _floats(text: str):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text: str):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blsim", description="Coupled saturation/velocity simulator and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="integrate one configuration")
    r.add_argument("config")
    r.add_argument("-o", "--out", required=True)
    r.add_argument("--trace-solver", action="store_true")

    e = sub.add_parser("study-epsilon", help="vanishing-viscosity study")
    e.add_argument("config")
    e.add_argument("--eps", type=_floats)
    e.add_argument("-o", "--out", required=True)

    t = sub.add_parser("study-tau", help="vanishing time-delay study")
    t.add_argument("config")
    t.add_argument("--tau", type=_floats)
    t.add_argument("-o", "--out", required=True)

    d = sub.add_parser("diagnose", help="kinetic certificates for a run directory")
    d.add_argument("dir")
    d.add_argument("--dump-measures", action="store_true")

    m = sub.add_parser("riemann", help="1-D Riemann problem against the exact solution")
    m.add_argument("--uL", type=float, default=1.0)
    m.add_argument("--uR", type=float, default=0.0)
    m.add_argument("--nx", type=int, default=512)
    m.add_argument("--T", type=float, default=0.25)
    m.add_argument("--cfl", type=float, default=0.5)
    m.add_argument("-o", "--out", required=True)

    mr = sub.add_parser("model-report", help="tabulate g, h and g' at 1001 points")
    mr.add_argument("config")
    mr.add_argument("-o", "--out", help="CSV path (default: standard output)")

    s = sub.add_parser("mms", help="manufactured-solution convergence of the velocity solver")
    s.add_argument("--nx", type=_ints, default=[32, 64, 128])
    s.add_argument("--nu", type=float, default=0.1)
    return p


# ---------------------------------------------------------------- commands

def _run_checks(traj):
    rows = []
    rep = traj.report.final()
    rows.append(("max_principle_min", rep["min_u"], -MAX_PRINCIPLE_TOL, rep["min_u"] >= -MAX_PRINCIPLE_TOL))
    rows.append(("max_principle_max", rep["max_u"], 1 + MAX_PRINCIPLE_TOL, rep["max_u"] <= 1 + MAX_PRINCIPLE_TOL))
    div = max(float(np.max(np.abs(discrete_divergence(s.v, traj.grid)))) for s in traj.states)
    rows.append(("max_divergence", div, DIVERGENCE_TOL, div <= DIVERGENCE_TOL))
    return rows


def cmd_run(args) -> int:
    parsed = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_echo(parsed, out)
    try:
        traj = run(parsed.run, trace_solver=args.trace_solver)
    except NumericError as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            bio.write_run_outputs(out, partial)
            log.error("aborted; last valid state written to %s", out)
        raise
    bio.write_run_outputs(out, traj)
    if args.trace_solver:
        bio.write_solver_trace(out / "solver_trace.csv", traj.solver_trace)
    checks = _run_checks(traj)
    bio.write_csv(out / "checks.csv", ("name", "value", "bound", "pass"),
                  [(n, v, b, "true" if p else "false") for n, v, b, p in checks])
    for n, v, b, p in checks:
        print(f"{'PASS' if p else 'FAIL'} {n}: {v:.3e} (bound {b:.3e})")
    return EXIT_OK if all(c[3] for c in checks) else EXIT_CERT


def _bound_lines(rows, parameter):
    res = uniform_bound_check(rows, parameter)
    lines, ok = [], True
    for col, (passed, excess, spread) in res.items():
        ok &= passed
        lines.append(f"uniform_bound.{col} = {'pass' if passed else 'fail'} "
                     f"excess={excess:.3e} spread={spread:.3e}")
    return lines, ok


def cmd_study_epsilon(args) -> int:
    parsed = parse_config(args.config)
    eps = args.eps or list(parsed.study.epsilons)
    if len(eps) < 1:
        raise ConfigError("no epsilon values given (use --eps or study.epsilons)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_echo(parsed, out)
    rep = epsilon_study(parsed.run, eps, workers=parsed.study.workers, samples=parsed.study.samples)
    bio.write_study(out, rep)
    d = rep.differences
    ok = all(r["m_estimate_margin"] >= -1e-12 and r["m_min_scaled"] >= -1e-10 for r in rep.rows)
    lines = []
    if len(d) >= 2:
        dec = all(b < a for a, b in zip(d, d[1:]))
        quarter = d[-1] <= d[0] / 4
        ok &= dec and quarter
        lines += [f"cauchy_decreasing = {'pass' if dec else 'fail'}",
                  f"cauchy_last_over_first = {d[-1] / d[0]!r}"]
        slope = np.polyfit(np.log(eps[1:]), np.log(d), 1)[0]
        lines.insert(0, f"slope = {slope!r}")
    blines, bok = _bound_lines(rep.rows, "epsilon")
    ok &= bok
    (out / "fit.txt").write_text("\n".join(lines + blines + [f"warning = {w}" for w in rep.warnings]) + "\n")
    print((out / "fit.txt").read_text(), end="")
    return EXIT_OK if ok else EXIT_CERT


def cmd_study_tau(args) -> int:
    parsed = parse_config(args.config)
    taus = args.tau or list(parsed.study.taus)
    if len(taus) < 1:
        raise ConfigError("no tau values given (use --tau or study.taus)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_echo(parsed, out)
    rep = tau_study(parsed.run, taus, workers=parsed.study.workers)
    bio.write_study(out, rep)
    ok = rep.slope is None or rep.slope >= 0.8
    text = (out / "fit.txt").read_text()
    print(text if text else "no slope fitted (fewer than two usable points)\n", end="")
    return EXIT_OK if ok else EXIT_CERT


def cmd_diagnose(args) -> int:
    from .kinetic import (Certificate, EntropyProductionObserver, WeakResidualObserver,
                          boundary_measures, build_kinetic, default_vgrid, indicator_certificate,
                          m_estimate_check, weak_tolerance)
    from .config import parse_config as _pc
    from .driver import replay
    out = Path(args.dir)
    parsed = _pc(out / "config.echo")
    traj = bio.load_run(out, parsed)
    if not traj.dense:
        raise ConfigError(f"{out} was stored at an output cadence; diagnose needs every step "
                          "(run.output_dt = 0)")
    vg = default_vgrid()
    cert = Certificate()
    kf = build_kinetic(traj, vg)
    cert.extend(indicator_certificate(kf, traj.u))
    ep = EntropyProductionObserver(vg, keep_cells=args.dump_measures)
    wr = WeakResidualObserver(vg.values[1:-1])
    replay(traj, [ep] + ([wr] if parsed.run.epsilon == 0 else []))
    meas = ep.measure()
    tol = meas.tolerance()
    for j, v in enumerate(meas.v):
        cert.add("m_plus_min", v, meas.min_plus[j], -tol[j], meas.min_plus[j] >= -tol[j])
        cert.add("m_minus_min", v, meas.min_minus[j], -tol[j], meas.min_minus[j] >= -tol[j])
        e = m_estimate_check(meas, v)
        cert.add("m_estimate_plus", v, e.lhs_plus, e.rhs_plus, e.margin_plus >= -e.tol)
        cert.add("m_estimate_minus", v, e.lhs_minus, e.rhs_minus, e.margin_minus >= -e.tol)
        if v > 1:
            cert.add("m_plus_support", v, abs(meas.mass_plus[j]), 0.0, meas.mass_plus[j] == 0.0)
        if v < 0:
            cert.add("m_minus_support", v, abs(meas.mass_minus[j]), 0.0, meas.mass_minus[j] == 0.0)
    if parsed.run.epsilon == 0:
        wt = weak_tolerance(traj)
        R = wr.residuals()
        for j, v in enumerate(wr.v):
            cert.add("weak_residual_min", v, R[j].min(), -wt, R[j].min() >= -wt)
    cert.extend(boundary_measures(traj, vg).certificate)
    bio.write_certificate(out / "certificate.csv", cert)
    if args.dump_measures:
        bio.write_measures(out, meas, traj.grid)
    fails = cert.failures()
    print(f"{len(cert.rows) - len(fails)}/{len(cert.rows)} checks passed")
    for f in fails:
        print(f"FAIL {f[0]} v={f[1]:g}: value={f[2]:.3e} bound={f[3]:.3e} {f[5]}")
    return EXIT_OK if not fails else EXIT_CERT


def cmd_riemann(args) -> int:
    from .model import build_flux_model
    from .riemann import run_riemann_1d
    model = build_flux_model()
    res = run_riemann_1d(model, args.uL, args.uR, nx=args.nx, T=args.T, cfl=args.cfl)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    exact = res.exact.profile(res.x, res.t, res.x_jump)
    bio.write_csv(out / "profile.csv", ("x", "u", "u_exact"), zip(res.x, res.u, exact))
    ok_star = res.post_shock_error <= 0.01
    ok_pos = res.shock_error <= 2 * res.dx
    lines = [f"u_star = {res.exact.u_star!r}", f"shock_speed = {res.exact.shock_speed!r}",
             f"tangency_residual = {res.exact.residual!r}",
             f"post_shock_estimate = {res.post_shock!r}", f"shock_x = {res.shock_x!r}",
             f"shock_x_exact = {res.shock_x_exact!r}", f"shock_error_over_dx = {res.shock_error / res.dx!r}",
             f"l1_error = {res.l1_error!r}",
             f"post_shock_check = {'pass' if ok_star else 'fail'}",
             f"shock_position_check = {'pass' if ok_pos else 'fail'}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok_star and ok_pos else EXIT_CERT


def cmd_model_report(args) -> int:
    parsed = parse_config(args.config)
    model = model_for(parsed.run)
    u = np.linspace(0.0, 1.0, 1001)
    rows = zip(u, model.g(u), model.h(u), model.gprime(u))
    from .model import SAMPLE_POINTS
    consts = f"K = {model.K!r}\nh0 = {model.h0!r}\nsample_points = {SAMPLE_POINTS}\n"
    if args.out:
        out = Path(args.out)
        bio.write_csv(out, ("u", "g", "h", "gprime"), rows)
        out.with_suffix(".constants.txt").write_text(consts)
    else:
        sys.stdout.write("u,g,h,gprime\n")
        for r in rows:
            sys.stdout.write(",".join(repr(float(x)) for x in r) + "\n")
        sys.stderr.write(consts)
    return EXIT_OK


def cmd_mms(args) -> int:
    from .stokes import mms_errors, observed_rates
    nxs = args.nx
    if len(nxs) < 2 or any(n < 4 for n in nxs):
        raise _UsageError("--nx needs at least two grids with nx >= 4")
    errs = mms_errors(nxs, args.nu)
    rates = observed_rates([1.0 / n for n in nxs], errs)
    print("nx,l2_error,rate")
    for i, (n, e) in enumerate(zip(nxs, errs)):
        print(f"{n},{float(e)!r},{'' if i == 0 else repr(float(rates[i - 1]))}")
    ok = bool(np.all((rates >= 1.7) & (rates <= 2.3)))
    return EXIT_OK if ok else EXIT_CERT


COMMANDS = {"run": cmd_run, "study-epsilon": cmd_study_epsilon, "study-tau": cmd_study_tau,
            "diagnose": cmd_diagnose, "riemann": cmd_riemann, "model-report": cmd_model_report,
            "mms": cmd_mms}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"blsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"blsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"blsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BLSimError as exc:
        print(f"blsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
