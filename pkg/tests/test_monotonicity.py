import math

import numpy as np
import pytest

from conftest import smooth_field
from repflow.errors import ConfigurationError, EmptyRegionError
from repflow.fields import constant_field, grassmannian_winding_field
from repflow.flow import FlowConfig, run_flow
from repflow.lattice import build_domain
from repflow.monotonicity import (
    Weighting,
    backward_gaussian,
    ball_volume,
    cutoff_profile,
    elliptic_phi,
    gaussian_field,
    gaussian_recentred_lower_bound_check,
    gaussian_recentring_constant,
    infimum_ratios,
    mu_ratio,
    nu_ratio,
    p0_exponent,
    parabolic_psi,
    parabolic_small_phi,
    phi_monotonicity_verdict,
    psi_inequality_verdict,
    ratio_profile,
)
from repflow.potentials import make_potential


def test_ball_volume():
    assert ball_volume(2, 1.0) == pytest.approx(math.pi)
    assert ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)


def test_p0_exponent():
    assert p0_exponent(0.0, 1.0, 2) == 2.0
    assert p0_exponent(0.5, 0.0, 3) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        p0_exponent(1.0, 0.0, 2)


def test_ratios_of_constant_field():
    dom = build_domain(2, 32, 16.0)
    spec = make_potential("smoothed", 0.5)
    f = constant_field(dom, np.diag([1.3, -0.7]))
    assert mu_ratio(spec, f, 0, 2.0) == pytest.approx(0.0, abs=1e-14)
    assert nu_ratio(spec, f, 0, 2.0) == pytest.approx(1.0)
    inf = infimum_ratios(spec, f, [0, 17], dom.R_M / 2)
    assert inf.mu0 == pytest.approx(0.0, abs=1e-14)
    assert inf.p0 == pytest.approx(2.0)


def test_ratios_lie_in_unit_interval():
    spec = make_potential("smoothed", 0.3)
    f = grassmannian_winding_field(build_domain(2, 32, 4.0), amplitude=0.3, seed=4)
    prof = ratio_profile(spec, f, 5, np.arange(2, 9) * f.domain.h)
    assert np.all((prof.nu >= 0) & (prof.nu <= 1))
    assert np.all((prof.mu >= 0) & (prof.mu <= 1 + 1e-9))
    assert prof.mu_inf == np.min(prof.mu)


def test_shell_too_small():
    spec = make_potential("smoothed", 0.3, l=3)
    f = smooth_field(16)
    with pytest.raises(EmptyRegionError):
        mu_ratio(spec, f, 0, f.domain.h)


def test_elliptic_phi_constant_density_scales_like_R_power():
    dom = build_domain(3, 32, 16.0)
    spec = make_potential("smoothed", 1.0, l=2)
    f = constant_field(dom, np.diag([1.0, -1.0]))
    # e = 1/2 everywhere, integrand m/(m-2) W = 3/2, so Phi ~ R^(2 - m - p0 + m)
    v1 = elliptic_phi(spec, f, 0, 2.0, 2.0, Weighting.CHAPTER_MONO)
    v2 = elliptic_phi(spec, f, 0, 3.0, 2.0, Weighting.CHAPTER_MONO)
    assert v1 == pytest.approx(1.5 * ball_volume(3, 2.0) / 8.0, rel=0.03)
    assert v2 / v1 == pytest.approx(1.0, rel=0.03)


def test_chapter_mono_requires_m_above_two():
    spec = make_potential("smoothed", 1.0)
    f = smooth_field(16)
    with pytest.raises(ConfigurationError):
        elliptic_phi(spec, f, 0, 0.1, 1.0, Weighting.CHAPTER_MONO)


def test_phi_verdict_rejects_unsorted_radii():
    spec = make_potential("smoothed", 1.0)
    f = smooth_field(16)
    with pytest.raises(ConfigurationError):
        phi_monotonicity_verdict(spec, f, 0, [0.2, 0.15], 1.0)


def test_backward_gaussian_mass():
    dom = build_domain(2, 64, 8.0)
    g = gaussian_field(dom, 0, 1.0, 0.9)
    assert np.sum(g) * dom.cell_volume == pytest.approx(1.0, rel=1e-6)
    assert backward_gaussian(dom, 0, 1.0, 0, 0.5) == pytest.approx(1 / (2 * math.pi))
    with pytest.raises(ConfigurationError):
        gaussian_field(dom, 0, 1.0, 1.0)


def test_cutoff_profile_shape():
    d = np.linspace(0, 2, 201)
    phi = cutoff_profile(d, 1.0)
    assert np.all(phi[d <= 0.5] == 1) and np.all(phi[d >= 1] == 0)
    assert np.all(np.diff(phi) <= 0)
    assert np.max(np.abs(np.gradient(phi, d))) == pytest.approx(3.0, rel=0.02)


def test_recentred_gaussian_bound(rng):
    dom = build_domain(2, 32, 8.0)
    rho = 0.5
    lo = gaussian_recentring_constant(2, rho)
    for _ in range(200):
        x = rng.uniform(-rho, rho, 2)
        t = rng.uniform(-rho * rho, 0)
        if x @ x > rho * rho:
            continue
        lhs, bound = gaussian_recentred_lower_bound_check(dom, (np.zeros(2), 0.0), rho, (x, t))
        assert bound == lo
        assert lhs >= bound


@pytest.fixture(scope="module")
def trajectory():
    dom = build_domain(2, 32, 8.0)
    spec = make_potential("smoothed", 0.3)
    f0 = grassmannian_winding_field(dom, amplitude=0.3, seed=5)
    return spec, run_flow(f0, spec, FlowConfig(t_end=5.0, dt=0.05, dt_policy="fixed", snapshot_stride=2))


def test_parabolic_small_phi_and_psi(trajectory):
    spec, traj = trajectory
    t0 = float(traj.times[-1])
    v = parabolic_small_phi(spec, traj, 0, t0, t0 - 1.0, 0.0)
    assert v > 0
    with pytest.raises(ConfigurationError):
        parabolic_small_phi(spec, traj, 0, t0, t0, 0.0)
    psi = parabolic_psi(spec, traj, (0, t0), 0.5, 0.0)
    assert psi.value > 0 and psi.coverage == pytest.approx(1.0)


def test_psi_identity_at_equal_radii(trajectory):
    spec, traj = trajectory
    t0 = float(traj.times[-1])
    v = psi_inequality_verdict(spec, traj, (0, t0), 0.5, 0.5, traj.initial.total)
    assert v.passed
    assert v.details["min_C_hat"] == 0.0
    with pytest.raises(ConfigurationError):
        psi_inequality_verdict(spec, traj, (0, t0), 0.6, 0.5, 1.0)
