import pytest

from blsim.config import SCHEMA, echo, parse_text
from blsim.errors import ConfigError


def test_minimal_config_uses_defaults():
    cfg = parse_text("grid.nx = 64\nrun.T = 0.5\n")
    r = cfg.run
    assert r.grid.nx == r.grid.ny == 64
    assert r.fluid.mu1 == r.fluid.mu2 == 1.0 and r.fluid.nu == 0.1 and r.fluid.tau == 1e-3
    assert r.relperm.kind == "corey_quadratic" and r.flux_mode == "simple"
    assert r.transport.epsilon == 0.0 and r.transport.cfl == 0.5
    assert r.solver.tolerance == 1e-10 and r.solver.max_iterations == 500
    assert r.T == 0.5 and r.output_dt == 0.0 and r.seed == 0


def test_range_error_names_line():
    with pytest.raises(ConfigError) as info:
        parse_text("run.T = 1\ngrid.nx = -4\n")
    assert info.value.lineno == 2
    assert str(info.value) == "line 2: grid.nx must be ≥ 4"


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigError) as info:
        parse_text("grid.nx = 8\nrun.T = 1\n# comment\ngrid.nx = 16\n")
    assert "lines 1 and 4" in str(info.value)


@pytest.mark.parametrize("text,fragment", [
    ("grid.nx = 8\n", "run.T"),
    ("grid.nx = 8\nrun.T = 1\nfoo.bar = 1\n", "unknown key"),
    ("grid.nx = 8\nrun.T = 1,5\n", "malformed number"),
    ("grid.nx = 8.0\nrun.T = 1\n", "malformed integer"),
    ("grid.nx = 8\nrun.T = 1\ntransport.mollify_data = maybe\n", "malformed boolean"),
    ("grid.nx 8\n", "key=value"),
    ("grid.nx = 8\nrun.T = 1\ntransport.cfl = 1.5\n", "cfl"),
])
def test_malformed_input(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert fragment in str(info.value)


def test_echo_round_trip():
    cfg = parse_text("grid.nx = 16\ngrid.ny = 8\nrun.T = 0.25\nfluid.tau = 0\n"
                     "study.taus = 1e-1, 1e-2\ntransport.mollify_data = yes\n")
    text = echo(cfg)
    assert len(text.splitlines()) == len(SCHEMA) + 1
    back = parse_text(text)
    assert back == cfg and echo(back) == text
