import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blsim.errors import CFLError, DomainError
from blsim.grid import BoundarySnapshot, StaggeredGrid, VelocityField
from blsim.model import RelPermModel, build_flux_model
from blsim.transport import (TransportSettings, boundary_outflux, directional_fluxes, face_flux,
                             flux_divergence, stable_dt, step_saturation)

BL = build_flux_model()
LINEAR = build_flux_model(relperm=RelPermModel("linear"))


def random_divergence_free(grid, rng, scale=1.0):
    psi = scale * rng.normal(size=(grid.ny + 1, grid.nx + 1))
    return VelocityField(np.diff(psi, axis=0) / grid.dy * grid.dx,
                         -np.diff(psi, axis=1) / grid.dx * grid.dx)


def snapshot_for(grid, v, u_b):
    return BoundarySnapshot(0.0, u_b, v.boundary_normal(grid), np.zeros(grid.n_bfaces))


def slice_flow(nx, u_left):
    g = StaggeredGrid(nx, 1)
    v = VelocityField.uniform(g, 1.0, 0.0)
    ub = np.zeros(g.n_bfaces)
    ub[g.side_slice("left")] = u_left
    return g, v, BoundarySnapshot(0.0, ub, v.boundary_normal(g), np.zeros(g.n_bfaces))


def test_stable_dt_advective_bound():
    g = StaggeredGrid(64, 64)
    dt = stable_dt(None, VelocityField.uniform(g, 1.0, 0.0), BL, TransportSettings(cfl=0.5), g)
    assert dt == pytest.approx(1 / 256, rel=1e-6)


def test_stable_dt_diffusive_bound():
    g = StaggeredGrid(64, 64)
    dt = stable_dt(None, VelocityField.zeros(g), BL, TransportSettings(epsilon=1.0, cfl=0.5), g)
    assert dt == pytest.approx(0.5 * (1 / 64) ** 2 / 4)


def test_stable_dt_quiet_flow_returns_cap():
    g = StaggeredGrid(16, 16)
    assert stable_dt(None, VelocityField.zeros(g), BL, TransportSettings(dt_max=0.02), g) == 0.02


@pytest.mark.parametrize("scheme", ["upwind_monotone", "engquist_osher", "godunov"])
@pytest.mark.parametrize("a", [0.0, 0.3, 0.7, 1.0])
@pytest.mark.parametrize("vn", [-2.0, 0.5])
def test_face_flux_consistency(scheme, a, vn):
    assert face_flux(a, a, vn, BL, scheme) == pytest.approx(vn * BL.g(a))


def test_face_flux_examples():
    assert face_flux(1.0, 0.0, 1.0, BL) == 1.0
    assert face_flux(0.2, 0.9, 0.0, BL) == 0.0
    with pytest.raises(DomainError):
        face_flux(0.2, 0.9, 1.0, BL, "lax")


@pytest.mark.parametrize("eps", [0.0, 1e-2])
def test_constants_are_preserved(eps):
    g = StaggeredGrid(16, 16)
    v = random_divergence_free(g, np.random.default_rng(1))
    c = 0.37
    bs = snapshot_for(g, v, np.full(g.n_bfaces, c))
    s = TransportSettings(epsilon=eps)
    out = step_saturation(np.full(g.shape, c), v, bs, BL, s, stable_dt(None, v, BL, s, g), g)
    np.testing.assert_allclose(out.u, c, atol=1e-14)


def test_linear_advection_of_a_step():
    g, v, bs = slice_flow(256, 1.0)
    u = np.where(g.xc < 0.25, 1.0, 0.0)[None, :]
    s = TransportSettings(dt_max=1.0)
    t, T = 0.0, 0.25
    while t < T - 1e-14:
        dt = min(stable_dt(u, v, LINEAR, s, g), T - t)
        u = step_saturation(u, v, bs, LINEAR, s, dt, g).u
        t += dt
    exact = np.where(g.xc < 0.5, 1.0, 0.0)
    assert np.sum(np.abs(u[0] - exact)) * g.dx <= 0.05


def test_oversized_step_is_refused():
    g, v, bs = slice_flow(32, 1.0)
    s = TransportSettings()
    bound = stable_dt(None, v, BL, s, g)
    with pytest.raises(CFLError) as info:
        step_saturation(np.zeros(g.shape), v, bs, BL, s, 2 * bound, g)
    assert info.value.bound == pytest.approx(bound)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 5e-3]))
def test_random_data_maximum_principle(seed, eps):
    rng = np.random.default_rng(seed)
    g = StaggeredGrid(12, 10)
    v = random_divergence_free(g, rng)
    bs = snapshot_for(g, v, rng.random(g.n_bfaces))
    s = TransportSettings(epsilon=eps, cfl=1.0)
    u = rng.random(g.shape)
    dt = stable_dt(u, v, BL, s, g)
    for _ in range(500):
        out = step_saturation(u, v, bs, BL, s, dt, g)
        assert out.raw_min >= -1e-14 and out.raw_max <= 1 + 1e-14
        u = out.u


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 1e-2]))
def test_conservation_up_to_boundary_flux(seed, eps):
    rng = np.random.default_rng(seed)
    g = StaggeredGrid(10, 8)
    v = random_divergence_free(g, rng)
    bs = snapshot_for(g, v, rng.random(g.n_bfaces))
    s = TransportSettings(epsilon=eps)
    u = rng.random(g.shape)
    dt = stable_dt(u, v, BL, s, g)
    out = step_saturation(u, v, bs, BL, s, dt, g)
    Fx, Fy = directional_fluxes(u, bs.u_b, v, BL, eps, s.scheme, g)
    change = np.sum(out.u - u) * g.cell_area
    expected = -dt * np.sum(boundary_outflux(Fx, Fy, g))
    assert change == pytest.approx(expected, rel=1e-12, abs=1e-14)
    assert np.sum(flux_divergence(Fx, Fy, g)) * g.cell_area == pytest.approx(
        np.sum(boundary_outflux(Fx, Fy, g)), rel=1e-12, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 1e-2]))
def test_monotone_update(seed, eps):
    rng = np.random.default_rng(seed)
    g = StaggeredGrid(10, 8)
    v = random_divergence_free(g, rng)
    bs = snapshot_for(g, v, rng.random(g.n_bfaces))
    s = TransportSettings(epsilon=eps, cfl=1.0)
    u = rng.random(g.shape)
    w = np.minimum(u + rng.random(g.shape) * 0.5, 1.0)
    dt = stable_dt(u, v, BL, s, g)
    assert np.all(step_saturation(u, v, bs, BL, s, dt, g).u <= step_saturation(w, v, bs, BL, s, dt, g).u)


def test_settings_validation():
    with pytest.raises(DomainError):
        TransportSettings(cfl=1.5)
    with pytest.raises(DomainError):
        TransportSettings(epsilon=-1.0)
