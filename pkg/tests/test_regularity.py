import math

import numpy as np
import pytest

from repflow.errors import ConfigurationError, EmptyRegionError
from repflow.fields import grassmannian_winding_field
from repflow.flow import FlowConfig, run_flow, trajectory_from_snapshots
from repflow.lattice import build_domain
from repflow.potentials import make_potential
from repflow.regularity import (
    bad_set,
    bad_set_dimension,
    ball_integral,
    ball_sup,
    cover_radius,
    eps0_rule,
    h_profile,
    hausdorff_sweep,
    minimal_C1,
    moser_elliptic_check,
    moser_factor,
    moser_parabolic_check,
    sup_e_bound_sweep,
    sup_e_bounds,
    vitali_cover,
)


def test_ball_sup_and_integral():
    dom = build_domain(2, 16, 16.0)
    v = np.zeros(256)
    v[dom.flat_index((0, 2))] = 5.0
    c = np.array([[0, 0]])
    sups, where = ball_sup(dom, v, c, 2.0)
    assert sups[0] == 5.0 and where[0] == dom.flat_index((0, 2))
    assert ball_sup(dom, v, c, 1.0)[0][0] == 0.0
    assert ball_integral(dom, np.ones(256), c, 1.0)[0] == pytest.approx(5.0, rel=0.3)


def test_moser_factor_and_check():
    dom = build_domain(2, 32, 8.0)
    e = np.full(dom.n_sites, 2.0)
    assert moser_factor(1.0, 1.0, 16.0, 1.0, 0.5) == pytest.approx(65.0)
    chk = moser_elliptic_check(e, 1.0, 0, 1.0, 0.5, 1.0, 16.0, dom)
    assert chk.lhs == 2.0
    assert chk.passed
    assert minimal_C1(chk) == 0.0
    with pytest.raises(ConfigurationError):
        moser_elliptic_check(e, 1.0, 0, 1.0, 0.5, 1.0, 16.0)
    with pytest.raises(ConfigurationError):
        moser_elliptic_check(e, 1.0, 0, 2.5, 0.5, 1.0, 16.0, dom)


def test_minimal_C1_is_tight():
    dom = build_domain(2, 32, 8.0)
    e = np.zeros(dom.n_sites)
    e[0] = 1e6
    chk = moser_elliptic_check(e, 1.0, 0, 1.0, 0.5, 1.0, 0.0, dom)
    assert not chk.passed
    need = minimal_C1(chk)
    again = moser_elliptic_check(e, 1.0, 0, 1.0, 0.5, need * (1 + 1e-9), 0.0, dom)
    assert again.passed


def test_moser_parabolic_on_flow():
    dom = build_domain(2, 32, 8.0)
    spec = make_potential("smoothed", 0.3)
    traj = run_flow(grassmannian_winding_field(dom, amplitude=0.3), spec,
                    FlowConfig(t_end=2.0, dt=0.05, dt_policy="fixed", snapshot_stride=2))
    t0 = float(traj.times[-1])
    chk = moser_parabolic_check(traj, 2.0, (0, t0), 1.0, 0.5, 1.0, 16.0)
    assert chk.passed
    short = trajectory_from_snapshots(spec, [0], [traj.final])
    with pytest.raises(EmptyRegionError):
        moser_parabolic_check(short, 2.0, (0, t0), 1.0, 0.5, 1.0, 16.0)


def test_h_profile_maximizer():
    dom = build_domain(2, 32, 8.0)
    e = np.zeros(dom.n_sites)
    e[dom.flat_index((3, 0))] = 4.0
    prof = h_profile(e, 0, 1.5, 1.0, [0.0, 0.5, 1.0], dom)
    assert prof.sigma0 == 1.0
    assert prof.x1 == dom.flat_index((3, 0))
    assert prof.e0 == 4.0
    with pytest.raises(ConfigurationError):
        h_profile(e, 0, 1.5, 1.0, [1.5], dom)


def test_eps0_rule():
    assert eps0_rule(make_potential("smoothed", 0.04), 2.0) == pytest.approx(0.01)
    assert eps0_rule(make_potential("higher_power", 0.04, 2), 1.0) == pytest.approx(0.1)


def test_bad_set_and_dimension():
    dom = build_domain(2, 8)
    e = np.zeros(64)
    e[[3, 9]] = [10.0, 9.99]
    assert bad_set(e, 0.1, dom).indices.tolist() == [3]
    assert bad_set_dimension(2, 1) == 1.0
    assert bad_set_dimension(3, 3) == pytest.approx(1.5)
    assert cover_radius(0.25, 1.0) == pytest.approx(2 * math.sqrt(4 * 0.25**2))
    with pytest.raises(ConfigurationError):
        bad_set(e, 0.0, dom)


def test_vitali_cover_line():
    dom = build_domain(2, 32, 32.0)
    sites = [dom.flat_index((i, 0)) for i in range(10)]
    rep = vitali_cover(dom, sites, 1.0, d=1.0)
    assert rep.covered
    assert rep.centers.indices.tolist() == [dom.flat_index((i, 0)) for i in (0, 3, 6, 9)]
    assert rep.measure == pytest.approx(4 * 3.0)
    empty = vitali_cover(dom, [], 1.0)
    assert empty.J == 0 and empty.measure == 0.0


def test_sweep_tables():
    dom = build_domain(2, 16, 4.0)
    runs = []
    for b in (1.0, 0.5):
        spec = make_potential("smoothed", b)
        runs.append((b, run_flow(grassmannian_winding_field(dom, amplitude=0.1), spec, FlowConfig(n_steps=5))))
    h = hausdorff_sweep(runs, 1.0)
    assert h.summary["vacuous"] and h.summary["bounded"]
    assert h.column("J").tolist() == [0.0, 0.0]
    s = sup_e_bound_sweep(runs, 1e6)
    assert s.summary["passed"]
    assert s.summary["min_C"] == pytest.approx(max(s.column("ratio")))
    b1, b2 = sup_e_bounds(2, 0.5, 3.0)
    assert b1 == pytest.approx(12.0)
    assert b2 == pytest.approx(9.0 * 0.5 ** -3)
