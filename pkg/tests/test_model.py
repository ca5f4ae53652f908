import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blsim.errors import DomainError, ModelError
from blsim.model import (FAMILIES, FluidParams, RelPermModel, build_flux_model, derived_constants,
                         make_entropy_pair, series_sum, sgn_minus, sgn_plus)


def truncated_series(lam, nu, N=1_000_000):
    """Direct sum over |n| <= N plus the integral estimate of the tail."""
    n = np.arange(1, N + 1, dtype=float)
    body = 1.0 / lam + 2.0 * np.sum(1.0 / (lam + n**2 * nu))
    a = np.sqrt(nu / lam) * (N + 0.5)
    tail = 2.0 / np.sqrt(lam * nu) * (np.pi / 2 - np.arctan(a))
    return body + tail


@pytest.fixture(scope="module")
def bl():
    return build_flux_model()


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("nu", [0.1, 1.0, 10.0])
def test_series_closed_form_matches_truncated_sum(lam, nu):
    assert series_sum(lam, nu) == pytest.approx(truncated_series(lam, nu), rel=0, abs=1e-10)


def test_series_unit_example():
    s = series_sum(1.0, 1.0)
    assert s == pytest.approx(3.15335, abs=1e-5)
    assert 1 / s == pytest.approx(0.31712, abs=1e-5)


def test_series_large_nu_keeps_only_zero_mode():
    assert series_sum(2.0, 1e12) == pytest.approx(0.5, rel=1e-5)


@pytest.mark.parametrize("lam,nu", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_series_domain_errors(lam, nu):
    with pytest.raises(DomainError):
        series_sum(lam, nu)


@pytest.mark.parametrize("u,g", [(0.5, 0.5), (0.8, 0.64 / 0.68), (0.0, 0.0), (1.0, 1.0)])
def test_fractional_flow_examples(bl, u, g):
    assert bl.g(u) == pytest.approx(g, abs=1e-12)


@pytest.mark.parametrize("u,h", [(0.5, 4.0), (0.8, 2 / 0.68)])
def test_damping_examples(bl, u, h):
    assert bl.h(u) == pytest.approx(h, abs=1e-12)


def test_constant_relperm_gives_unit_damping():
    table = ((0.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    m = build_flux_model(relperm=RelPermModel("tabulated", table=table))
    u = np.linspace(-0.5, 1.5, 41)
    assert np.all(m.h(u) == 1.0)


def test_derived_constants(bl):
    K, h0 = derived_constants(bl)
    assert K == pytest.approx(2.0, abs=1e-6)
    assert h0 == 2.0
    lin = build_flux_model(relperm=RelPermModel("linear"))
    assert lin.K == pytest.approx(1.0, abs=1e-12)


def test_nonpositive_damping_is_refused():
    with pytest.raises(ModelError):
        build_flux_model(relperm=RelPermModel("tabulated", table=((0.0, 0.0, 1.0), (0.5, 0.0, 0.0),
                                                                   (1.0, 1.0, 0.0))))


@pytest.mark.parametrize("kw", [dict(mu1=0.0), dict(mu2=-1.0), dict(nu=0.0), dict(tau=-1e-3)])
def test_fluid_validation(kw):
    with pytest.raises(ModelError):
        FluidParams(**kw)


def test_entropy_pair_examples(bl):
    k = make_entropy_pair("kruzhkov", 0.5, bl)
    assert k.eta(0.5) == 0 and k.q(0.5) == 0
    p = make_entropy_pair("plus", 0.3, bl)
    assert p.eta(0.6) == pytest.approx(0.3)
    assert p.q(0.6) == pytest.approx(0.537136, abs=1e-6)
    m = make_entropy_pair("minus", 0.3, bl)
    assert m.eta(0.6) == 0 and m.q(0.6) == 0


def test_sign_conventions():
    assert sgn_plus(0.0) == 0 and sgn_plus(1e-300) == 1 and sgn_plus(-1.0) == 0
    assert sgn_minus(0.0) == 0 and sgn_minus(-1e-300) == -1 and sgn_minus(2.0) == 0


@pytest.mark.parametrize("mode", ["simple", "series"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.5])
def test_model_invariants(mode, p):
    m = build_flux_model(relperm=RelPermModel(exponent=p), mode=mode)
    u = np.linspace(0, 1, 10_001)
    g = m.g(u)
    assert g[0] == 0 and g[-1] == 1
    assert np.all(np.diff(g) >= 0)
    wide = np.linspace(-3, 4, 701)
    assert np.all(m.h(wide) >= m.h0) and m.h0 > 0
    assert m.g(-0.5) == m.g(0.0) and m.g(1.5) == m.g(1.0)
    assert m.h(-0.5) == m.h(0.0) and m.h(1.5) == m.h(1.0)


def test_series_mode_approaches_simple_mode():
    u = np.linspace(0, 1, 201)
    simple = build_flux_model()
    series = build_flux_model(fluid=FluidParams(nu=1e6), mode="series")
    assert np.max(np.abs(series.g(u) - simple.g(u))) <= 1e-4


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_entropy_compatibility(family, u, v):
    m = build_flux_model()
    e = 1e-6
    if family != "square" and abs(u - v) < 10 * e:
        return
    pair = make_entropy_pair(family, v, m)
    dq = (pair.q(u + e) - pair.q(u - e)) / (2 * e)
    expected = pair.deta(u) * m.gprime(u)
    assert dq == pytest.approx(expected, rel=1e-6, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["kruzhkov", "plus", "minus"]), st.floats(-0.5, 1.5), st.floats(-0.5, 1.5))
def test_entropy_flux_bounded_by_K_eta(family, u, v):
    m = build_flux_model()
    pair = make_entropy_pair(family, v, m)
    assert abs(pair.q(u)) <= m.K * pair.eta(u) + 1e-14
