import math

import pytest

from repflow.config import config_from_dict, load_config, parse_config
from repflow.errors import ConfigurationError

BASE = """
[domain]
m = 2
n_per_axis = 16
period = 4.0

[potential]
family = "smoothed"
b = 0.5
"""


def test_defaults_filled_in():
    cfg = parse_config(BASE)
    assert cfg.matrix.l == 2
    assert cfg.flow.n_steps == 100
    assert cfg.analysis.eps0 == "calibrated"
    assert cfg.output.directory == "out"
    assert cfg.spec().b == 0.5
    assert cfg.build_domain().R_M == 1.0
    assert cfg.initial_field().data.shape == (16, 16, 2, 2)


def test_inf_strings_and_resolved(tmp_path):
    cfg = parse_config(BASE + '\n[flow]\ndt_max = "inf"\n')
    assert math.isinf(cfg.flow.dt_max)
    resolved = cfg.resolved()
    assert resolved["domain"]["n_per_axis"] == 16
    p = tmp_path / "c.toml"
    p.write_text(BASE)
    assert load_config(p).domain.m == 2


@pytest.mark.parametrize("extra,key", [
    ("[bogus]\nx = 1\n", "bogus"),
    ("[flow]\nspeed = 1\n", "flow.speed"),
    ("[flow]\nn_steps = 1.5\n", "flow.n_steps"),
    ("[flow]\nn_steps = true\n", "flow.n_steps"),
    ("[flow]\nsafety = 2.0\n", "flow.safety"),
    ("[flow]\nintegrator = \"rk4\"\n", "flow.integrator"),
    ("[flow]\nt_end = -1.0\n", "flow.t_end"),
    ("[matrix]\nk = 5\n", "matrix.k"),
    ("[matrix]\nwinding = [1]\n", "matrix.winding"),
    ("[matrix]\nscale = \"big\"\n", "matrix.scale"),
    ("[analysis]\nradii = [0.5, 3.0]\n", "analysis.radii[1]"),
    ("[analysis]\ncenters = [1000]\n", "analysis.centers[0]"),
    ("[analysis]\nb_sweep = [1.0, -1.0]\n", "analysis.b_sweep[1]"),
    ("[analysis]\ndelta = 0.9\n", "analysis.delta"),
    ("[analysis]\nrho = 5.0\n", "analysis.rho"),
    ("[output]\nsnapshots = 1\n", "output.snapshots"),
])
def test_errors_name_the_key(extra, key):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(BASE + "\n" + extra)
    assert exc.value.key == key


def test_required_keys():
    with pytest.raises(ConfigurationError) as exc:
        config_from_dict({"domain": {"m": 2}, "potential": {"family": "smoothed"}})
    assert exc.value.key == "domain.n_per_axis"
    with pytest.raises(ConfigurationError) as exc:
        config_from_dict({"domain": {"m": 2, "n_per_axis": 8}})
    assert exc.value.key == "potential.family"


def test_domain_errors_propagate():
    with pytest.raises(ConfigurationError) as exc:
        parse_config(BASE.replace("n_per_axis = 16", "n_per_axis = 2"))
    assert exc.value.key == "domain.n_per_axis"


def test_singular_requires_explicit_policy():
    text = BASE.replace('"smoothed"', '"singular"')
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert exc.value.key == "flow.dt_policy"
    cfg = parse_config(text + '\n[flow]\ndt_policy = "adaptive"\n')
    assert cfg.flow.dt_policy == "adaptive"


def test_invalid_toml():
    with pytest.raises(ConfigurationError):
        parse_config("[domain\nm = 2")
