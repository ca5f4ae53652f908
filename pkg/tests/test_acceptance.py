"""Acceptance criteria, each at its stated tolerance and scale.

The expensive trajectories are shared between criteria through module-scoped
fixtures; the whole module takes about a quarter of an hour on one core.
"""
import numpy as np
import pytest

from blsim.driver import (Observer, RunConfig, epsilon_study, run, tau_study,
                          uniform_bound_check)
from blsim.errors import NumericError
from blsim.grid import StaggeredGrid, discrete_divergence
from blsim.kinetic import (EntropyProductionObserver, VGrid, WeakResidualObserver, build_kinetic,
                           default_vgrid, indicator_certificate, m_estimate_check, weak_tolerance)
from blsim.model import RelPermModel, build_flux_model, series_sum
from blsim.riemann import run_riemann_1d
from blsim.stokes import SolverSettings, mms_errors, observed_rates

SUITE_SIZE = 50
SUITE_STEPS = 200
V21 = np.linspace(0.0, 1.0, 21)
TAUS = [1e-1, 1e-2, 1e-3, 1e-4]
EPSILONS = [4e-2, 2e-2, 1e-2, 5e-3]


class DivergenceObserver(Observer):
    def __init__(self):
        self.worst = 0.0

    def _check(self, st, grid):
        self.worst = max(self.worst, float(np.max(np.abs(discrete_divergence(st.v, grid)))))

    def start(self, state, traj):
        self._check(state, traj.grid)

    def step(self, prev, new, traj):
        self._check(new, traj.grid)


def suite_config(i, rng):
    return RunConfig(grid=StaggeredGrid(64, 64), relperm=RelPermModel(exponent=float(rng.uniform(1.5, 3.5))),
                     preset="random", seed=i, T=2.0, max_steps=SUITE_STEPS,
                     solver=SolverSettings(tolerance=1e-10)).with_tau(float(rng.choice([0.0, 1e-3, 1e-2])))


def run_steps(cfg):
    """Exactly SUITE_STEPS steps: the step limit stops the run and keeps every level."""
    try:
        traj = run(cfg)
    except NumericError as exc:
        traj = exc.trajectory
        assert "step limit" in str(exc)
    assert len(traj.dts) == SUITE_STEPS
    return traj


@pytest.fixture(scope="module")
def suite():
    rng = np.random.default_rng(20261016)
    out = []
    for i in range(SUITE_SIZE):
        traj = run_steps(suite_config(i, rng))
        div = max(float(np.max(np.abs(discrete_divergence(s.v, traj.grid)))) for s in traj.states)
        rep = traj.report.final()
        kept = traj if i < 4 else None  # a few full trajectories for the kinetic certificate
        out.append({"min_u": rep["min_u"], "max_u": rep["max_u"], "div": div, "traj": kept})
    return out


def flood_with_observers(n):
    ep = EntropyProductionObserver(VGrid(V21), keep_cells=False)
    wr = WeakResidualObserver(V21)
    dv = DivergenceObserver()
    traj = run(RunConfig(grid=StaggeredGrid(n, n), T=0.5), observers=[ep, wr, dv], store=False)
    return {"traj": traj, "measure": ep.measure(), "min_scaled": ep.min_scaled(), "weak_min": wr.minimum(),
            "weak_tol": weak_tolerance(traj), "div": dv.worst}


@pytest.fixture(scope="module")
def flood128():
    return flood_with_observers(128)


@pytest.fixture(scope="module")
def tau_rows():
    return tau_study(RunConfig(grid=StaggeredGrid(64, 64), T=0.5), TAUS)


@pytest.fixture(scope="module")
def eps_rows():
    return epsilon_study(RunConfig(grid=StaggeredGrid(512, 1), T=0.5), EPSILONS)


def test_criterion_01_maximum_principle(suite, verdict):
    lo = min(r["min_u"] for r in suite)
    hi = max(r["max_u"] for r in suite)
    ok = lo >= -1e-12 and hi <= 1 + 1e-12
    assert verdict(1, ok, f"{len(suite)} random runs x {SUITE_STEPS} steps, min u = {lo:.3e}, max u = {hi:.15g}")


def test_criterion_02_divergence_free(suite, flood128, verdict):
    worst = max(max(r["div"] for r in suite), flood128["div"])
    ok = worst <= 1e-9
    assert verdict(2, ok, f"max cell divergence over suite and flood = {worst:.3e} (tolerance 1e-10)")


def test_criterion_03_defect_positivity(flood128, verdict):
    m = flood128["measure"]
    scaled = flood128["min_scaled"]
    ok = m.positivity_ok()
    assert verdict(3, ok, f"flood nx=128: min m+/- over cells and 21 levels = {scaled:.3e} x scheme scale")


def test_criterion_04_m_estimate(flood128, verdict):
    m = flood128["measure"]
    margins = [m_estimate_check(m, v).margin_plus for v in V21]
    ok = min(margins) >= 0
    assert verdict(4, ok, f"min over 21 levels of (bound - m+ mass) = {min(margins):.3e}")


def test_criterion_05_kinetic_indicator(suite, verdict):
    flood = run(RunConfig(grid=StaggeredGrid(64, 64), T=0.5))
    trajs = [flood] + [r["traj"] for r in suite if r["traj"] is not None]
    failures = 0
    for traj in trajs:
        kf = build_kinetic(traj, default_vgrid())
        failures += len(indicator_certificate(kf, traj.u).failures())
    ok = failures == 0
    assert verdict(5, ok, f"{len(trajs)} trajectories, {failures} failed indicator checks")


def test_criterion_06_weak_solution(flood128, verdict):
    mins = {128: flood128["weak_min"]}
    for n in (64, 256):
        mins[n] = flood_with_observers(n)["weak_min"]
    worst = [max(-mins[n], 0.0) for n in (64, 128, 256)]
    ok = mins[128] >= -1e-3 and worst[0] > worst[1] > worst[2]
    detail = ", ".join(f"nx={n}: {mins[n]:.3e}" for n in (64, 128, 256))
    assert verdict(6, ok, f"minimum residual over 64 test functions and 21 levels: {detail}")


def test_criterion_07_tau_rate(tau_rows, verdict):
    slope = tau_rows.slope
    ok = slope is not None and 0.8 <= slope <= 1.2
    assert verdict(7, ok, f"slope of log D against log tau = {slope:.4f}")


def test_criterion_08_epsilon_cauchy(eps_rows, verdict):
    d = eps_rows.differences
    dec = all(b < a for a, b in zip(d, d[1:]))
    ratio = d[-1] / d[0]
    ok = dec and ratio <= 0.25
    detail = ", ".join(f"{x:.4e}" for x in d)
    assert verdict(8, ok, f"L1 differences {detail}; decreasing={dec}, last/first = {ratio:.3f}")


def test_criterion_09_riemann(verdict):
    res = run_riemann_1d(build_flux_model(), 1.0, 0.0, nx=512, T=0.25)
    ok = (res.post_shock_error <= 0.01 and res.shock_error <= 2 * res.dx
          and res.exact.residual <= 1e-12)
    assert verdict(9, ok, f"post-shock error {res.post_shock_error:.4f}, shock error "
                          f"{res.shock_error / res.dx:.2f} dx, tangency residual {res.exact.residual:.1e}")


def truncated_series(lam, nu, N=1_000_000):
    n = np.arange(1, N + 1, dtype=float)
    body = 1.0 / lam + 2.0 * np.sum(1.0 / (lam + n**2 * nu))
    tail = 2.0 / np.sqrt(lam * nu) * (np.pi / 2 - np.arctan(np.sqrt(nu / lam) * (N + 0.5)))
    return body + tail


def test_criterion_10_series_closed_form(verdict):
    vals = (0.1, 1.0, 10.0)
    err = max(abs(series_sum(a, b) - truncated_series(a, b)) for a in vals for b in vals)
    assert verdict(10, err <= 1e-10, f"max |closed form - truncated sum| = {err:.2e}")


def test_criterion_11_mms(verdict):
    nxs = [32, 64, 128]
    rates = observed_rates([1 / n for n in nxs], mms_errors(nxs, 0.1))
    ok = bool(np.all((rates >= 1.7) & (rates <= 2.3)))
    assert verdict(11, ok, "observed L2 rates " + ", ".join(f"{r:.3f}" for r in rates))


def test_criterion_12_uniform_bounds(tau_rows, eps_rows, verdict):
    lines, ok = [], True
    for rep, par in ((tau_rows, "tau"), (eps_rows, "epsilon")):
        for col, (passed, excess, spread) in uniform_bound_check(rep.rows, par).items():
            ok &= passed
            lines.append(f"{par}/{col} {excess:+.3f}")
    assert verdict(12, ok, "worst one-sided excess over the second-value reference: " + ", ".join(lines))
