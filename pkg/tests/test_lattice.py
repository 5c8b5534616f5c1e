import math

import numpy as np
import pytest

from repflow.errors import ConfigurationError, EmptyRegionError
from repflow.lattice import (
    ball_offsets,
    ball_quadrature,
    ball_sites,
    build_domain,
    cylinder_window,
    periodic_distance,
    shell_sites,
    shell_weight,
    site_set,
    wrapped_distance,
)


@pytest.mark.parametrize("args,key", [
    ((1, 8), "domain.m"),
    ((2, 3), "domain.n_per_axis"),
    ((2, 8, 0.0), "domain.period"),
    ((2, 8, math.inf), "domain.period"),
    ((2.5, 8), "domain.m"),
])
def test_build_domain_rejects(args, key):
    with pytest.raises(ConfigurationError) as exc:
        build_domain(*args)
    assert exc.value.key == key


def test_domain_geometry():
    dom = build_domain(3, 10, 5.0)
    assert dom.h == 0.5
    assert dom.n_sites == 1000
    assert dom.cell_volume == pytest.approx(0.125)
    assert dom.R_M == 1.25
    assert dom.shape == (10, 10, 10)
    assert dom.multi_index(123) == (1, 2, 3)
    assert dom.flat_index((1, 2, 13)) == 123
    np.testing.assert_allclose(dom.coords(123), [0.5, 1.0, 1.5])
    with pytest.raises(ConfigurationError):
        dom.multi_index(1000)


def test_periodic_distance_uses_nearest_image():
    dom = build_domain(2, 10, 1.0)
    assert periodic_distance(dom, (0, 0), (9, 0)) == pytest.approx(0.1)
    assert periodic_distance(dom, (0, 0), (5, 5)) == pytest.approx(math.sqrt(0.5))
    assert wrapped_distance(dom, np.array([0.05, 0.0]), np.array([0.95, 0.0])) == pytest.approx(0.1)


def test_distance_field_matches_pairwise():
    dom = build_domain(2, 8, 2.0)
    d = dom.distance_field(11).ravel()
    for s in (0, 7, 40, 63):
        assert d[s] == pytest.approx(periodic_distance(dom, 11, s))


def test_site_set_forms_agree():
    dom = build_domain(2, 6, 1.0)
    mask = np.zeros(dom.shape, bool)
    mask[1, 2] = mask[4, 0] = True
    a = site_set(dom, mask)
    b = site_set(dom, [24, 8, 8])
    c = site_set(dom, np.array([[1, 2], [4, 0]]))
    assert a.indices.tolist() == b.indices.tolist() == c.indices.tolist() == [8, 24]
    assert 8 in a and 9 not in a
    with pytest.raises(ConfigurationError):
        site_set(dom, [36])


def test_ball_sites_count_and_wrap():
    dom = build_domain(2, 16, 16.0)
    ball = ball_sites(dom, 0, 1.0)
    assert len(ball) == 5
    assert dom.flat_index((15, 0)) in ball
    assert len(ball_offsets(dom, math.sqrt(2))) == 9


def test_ball_radius_limit():
    dom = build_domain(2, 16, 4.0)
    with pytest.raises(ConfigurationError):
        ball_sites(dom, 0, 2.0)
    with pytest.raises(ConfigurationError):
        ball_sites(dom, 0, 0.0)


def test_shell_is_half_open_annulus():
    dom = build_domain(2, 32, 32.0)
    s = shell_sites(dom, 0, 3.0)
    d = np.array([periodic_distance(dom, 0, x) for x in s])
    assert np.all((d >= 2.5) & (d < 3.5))
    assert shell_weight(dom) == pytest.approx(1.0)


def test_shell_can_be_empty():
    dom = build_domain(2, 32, 32.0)
    with pytest.raises(EmptyRegionError):
        shell_sites(dom, 0, 1.5, width=0.1)


def test_soft_ball_quadrature_approximates_volume():
    dom = build_domain(3, 64, 16.0)
    for R in (2.0, 3.3, 5.0):
        _, w = ball_quadrature(dom, R)
        exact = 4 / 3 * math.pi * R**3
        assert abs(w.sum() / exact - 1) < 0.02
        _, hard = ball_quadrature(dom, R, soft=False)
        assert hard.sum() == pytest.approx(len(hard) * dom.cell_volume)


def test_cylinder_window_variants():
    dom = build_domain(2, 16, 8.0)
    times = np.arange(0.0, 10.0, 0.5)
    _, idx = cylinder_window(dom, times, 0, 5.0, 1.0)
    assert times[idx].tolist() == [4.0, 4.5, 5.0, 5.5, 6.0]
    _, idx = cylinder_window(dom, times, 0, 5.0, 1.0, backward=True)
    assert times[idx].tolist() == [4.0, 4.5, 5.0]
    _, idx = cylinder_window(dom, times, 0, 9.0, 1.0, strip=True)
    assert times[idx].tolist() == [5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0]
    with pytest.raises(EmptyRegionError):
        cylinder_window(dom, times, 0, 50.0, 1.0)
