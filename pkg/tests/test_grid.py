import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from blsim.errors import DomainError, StructuralError
from blsim.grid import (BoundaryData, InitialData, StaggeredGrid, VelocityField, discrete_divergence,
                        flood_preset, load_boundary_csv, mollify_cells, net_flux, norms,
                        quiescent_preset, validate_data, write_boundary_csv)


def side_data(grid, left=0.0, right=0.0, bottom=0.0, top=0.0):
    a = np.zeros(grid.n_bfaces)
    for side, val in zip(("left", "right", "bottom", "top"), (left, right, bottom, top)):
        a[grid.side_slice(side)] = val
    return a


def analytic_stream_velocity(grid):
    """Faces sampled from psi = sin(pi x) sin(pi y) / pi."""
    X, Y = grid.xface_centers()
    vx = np.sin(np.pi * X) * np.cos(np.pi * Y)
    X, Y = grid.yface_centers()
    vy = -np.cos(np.pi * X) * np.sin(np.pi * Y)
    return VelocityField(vx, vy)


def discrete_stream_velocity(grid, psi_nodes):
    vx = np.diff(psi_nodes, axis=0) / grid.dy
    vy = -np.diff(psi_nodes, axis=1) / grid.dx
    return VelocityField(vx, vy)


def test_shapes_and_boundary_ordering():
    g = StaggeredGrid(8, 6, 2.0, 1.5)
    assert g.shape == (6, 8) and g.vx_shape == (6, 9) and g.vy_shape == (7, 8)
    assert g.n_bfaces == 28
    assert g.bface_length.sum() == pytest.approx(g.perimeter)
    np.testing.assert_array_equal(g.bface_normal[g.side_slice("top")], [[0.0, 1.0]] * 8)


@pytest.mark.parametrize("nx,ny", [(3, 8), (8, 2), (0, 8)])
def test_grid_rejects_small_sizes(nx, ny):
    with pytest.raises(DomainError):
        StaggeredGrid(nx, ny)


def test_zero_data_validates():
    g = StaggeredGrid(16, 16)
    bd, u0 = quiescent_preset(g)
    assert validate_data(g, bd, InitialData(u0, VelocityField.zeros(g)), tau=1e-3).ok


def test_balanced_flood_validates():
    g = StaggeredGrid(16, 16)
    bd, u0 = flood_preset(g)
    assert net_flux(g, bd.b_n[0]) == 0.0
    rep = validate_data(g, bd, InitialData(u0), tau=0.0)
    assert rep.ok


def test_unbalanced_flux_reports_residual():
    g = StaggeredGrid(16, 16)
    b_n = side_data(g, left=-1.0, right=0.5)
    bd = BoundaryData.constant(np.zeros(g.n_bfaces), b_n, np.zeros(g.n_bfaces))
    rep = validate_data(g, bd, InitialData(np.zeros(g.shape)), tau=0.0)
    assert not rep.ok
    (name, _, value, _), = rep.failures()
    assert name == "net_flux_zero" and value == pytest.approx(0.5)


def test_validation_is_idempotent():
    g = StaggeredGrid(8, 8)
    bd, u0 = flood_preset(g)
    init = InitialData(u0.copy())
    a = validate_data(g, bd, init, 0.0).checks
    b = validate_data(g, bd, init, 0.0).checks
    assert a == b
    np.testing.assert_array_equal(init.u0, u0)


def test_shape_mismatch_is_structural():
    g = StaggeredGrid(8, 8)
    bd, _ = flood_preset(g)
    with pytest.raises(StructuralError):
        validate_data(g, bd, InitialData(np.zeros((4, 4))), 0.0)


def test_uniform_field_divergence_free():
    g = StaggeredGrid(16, 12)
    assert np.all(discrete_divergence(VelocityField.uniform(g, 1.0, 0.0), g) == 0)


def test_linear_field_has_unit_divergence():
    g = StaggeredGrid(16, 12)
    X, _ = g.xface_centers()
    v = VelocityField(X.copy(), np.zeros(g.vy_shape))
    np.testing.assert_allclose(discrete_divergence(v, g), 1.0, atol=1e-12)


def test_sampled_stream_field_divergence_vanishes_under_refinement():
    # for this separable stream function the O(dx^2) truncation terms of the
    # two difference quotients cancel, leaving only round-off
    for n in (16, 32, 64):
        g = StaggeredGrid(n, n)
        assert np.max(np.abs(discrete_divergence(analytic_stream_velocity(g), g))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(arrays(float, (9, 13), elements=st.floats(-10, 10)))
def test_discrete_stream_function_is_exactly_divergence_free(psi):
    g = StaggeredGrid(12, 8)
    div = discrete_divergence(discrete_stream_velocity(g, psi), g)
    assert np.max(np.abs(div)) <= 1e-13 * max(1.0, np.max(np.abs(psi))) / g.dx ** 2


def test_norm_examples():
    g = StaggeredGrid(128, 128)
    X, _ = g.cell_centers()
    assert norms(np.full(g.shape, -3.0), g, "L2") == pytest.approx(3.0)
    assert norms(X, g, "H1_semi") == pytest.approx(1.0, abs=1e-2)
    assert norms(np.sin(2 * np.pi * X), g, "L2") == pytest.approx(1 / np.sqrt(2), abs=1e-3)
    assert norms(np.full(g.shape, 0.5), g, "L1") == pytest.approx(0.5)
    assert norms(-X, g, "Linf") == pytest.approx(g.xc[-1])
    with pytest.raises(DomainError):
        norms(X, g, "H2")


@settings(max_examples=30, deadline=None)
@given(arrays(float, (6, 7), elements=st.floats(-5, 5)), arrays(float, (6, 7), elements=st.floats(-5, 5)),
       st.floats(-4, 4), st.sampled_from(["L1", "L2", "Linf", "H1_semi"]))
def test_norm_homogeneity_and_triangle(f, h, c, kind):
    g = StaggeredGrid(7, 6)
    nf, nh = norms(f, g, kind), norms(h, g, kind)
    assert norms(c * f, g, kind) == pytest.approx(abs(c) * nf, rel=1e-12, abs=1e-12)
    assert norms(f + h, g, kind) <= nf + nh + 1e-12


def test_boundary_csv_round_trip(tmp_path):
    g = StaggeredGrid(6, 5)
    rng = np.random.default_rng(3)
    shape = (3, g.n_bfaces)
    bd = BoundaryData(np.array([0.0, 0.1, 0.35]), rng.random(shape), rng.normal(size=shape),
                      rng.normal(size=shape))
    write_boundary_csv(tmp_path / "b.csv", bd)
    back = load_boundary_csv(tmp_path / "b.csv", g)
    for name in ("times", "u_b", "b_n", "b_t"):
        np.testing.assert_array_equal(getattr(back, name), getattr(bd, name))


def test_boundary_interpolates_linearly_in_time():
    bd = BoundaryData(np.array([0.0, 1.0]), [[0.0], [1.0]], [[2.0], [4.0]], [[0.0], [0.0]])
    s = bd.at(0.25)
    assert s.u_b[0] == pytest.approx(0.25) and s.b_n[0] == pytest.approx(2.5)
    assert bd.at(5.0).u_b[0] == 1.0 and bd.at(-1.0).b_n[0] == 2.0


def test_mollifier_preserves_constants_and_bounds():
    g = StaggeredGrid(32, 32)
    np.testing.assert_allclose(mollify_cells(np.full(g.shape, 0.4), g), 0.4)
    X, _ = g.cell_centers()
    m = mollify_cells((X < 0.5).astype(float), g)
    assert m.min() >= 0 and m.max() <= 1 and 0 < m[0, 15] < 1
