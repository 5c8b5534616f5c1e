import math

import numpy as np
import pytest

from conftest import smooth_field
from repflow.errors import ConfigurationError, SingularPotentialError
from repflow.fields import constant_field, grassmannian_winding_field
from repflow.lattice import build_domain
from repflow.potentials import (
    Family,
    compute_hessian_constants,
    energy_density,
    hessian_bound,
    hessian_constants,
    hessian_form,
    make_potential,
    potential_density,
    potential_gradient,
    potential_values,
    scaling_check,
    total_energy,
)


def test_make_potential_validation():
    assert make_potential("SMOOTHED", 0.5).family is Family.SMOOTHED
    with pytest.raises(ConfigurationError) as exc:
        make_potential("quartic")
    assert exc.value.key == "potential.family"
    with pytest.raises(ConfigurationError):
        make_potential("smoothed", 0.0)
    with pytest.raises(ConfigurationError):
        make_potential("smoothed", 1.0, L=2)
    with pytest.raises(ConfigurationError):
        make_potential("higher_power", 1.0, L=0)
    assert make_potential("singular", 5.0).b == 0.0


@pytest.mark.parametrize("family,L", [("singular", 1), ("smoothed", 1), ("higher_power", 2)])
def test_potential_matches_closed_form(family, L):
    spec = make_potential(family, 0.4, L, 2)
    f = np.array([[0.3, 0.8], [0.8, -0.5]])
    if family == "singular":
        expected = 0.5 * np.trace(np.linalg.inv(f @ f))
    else:
        expected = np.trace(np.linalg.inv(np.linalg.matrix_power(f, 2 * L) + 0.4 * np.eye(2))) / (2 * L)
    assert potential_values(spec, f) == pytest.approx(expected, rel=1e-13)


def test_singular_potential_rejects_zero_eigenvalue():
    dom = build_domain(2, 4)
    f = constant_field(dom, np.diag([1.0, 0.0]))
    with pytest.raises(SingularPotentialError):
        potential_density(make_potential("singular"), f)


def test_free_potential_vanishes():
    spec = make_potential("smoothed", math.inf)
    f = smooth_field(8, l=2)
    assert spec.is_free
    assert np.all(potential_density(spec, f).values == 0)
    assert np.all(potential_gradient(spec, f).data == 0)


def test_gradient_of_smoothed_potential():
    spec = make_potential("smoothed", 0.2, l=2)
    f = smooth_field(6, l=2)
    g = potential_gradient(spec, f).data
    a = f.data
    A = np.linalg.inv(a @ a + 0.2 * np.eye(2))
    np.testing.assert_allclose(g, -a @ A @ A, atol=1e-13)


def test_energy_density_and_total():
    spec = make_potential("smoothed", 1.0)
    dom = build_domain(2, 8, 2.0)
    f = constant_field(dom, np.diag([1.0, -1.0]))
    e = energy_density(spec, f)
    np.testing.assert_allclose(e.values, 0.5)
    rep = total_energy(spec, f)
    assert rep.total == pytest.approx(0.5 * 4.0)
    assert rep.kinetic == 0.0


def test_hessian_constants_smoothed_closed_form():
    cu, cq = compute_hessian_constants(1)
    assert cu == pytest.approx(1.0, rel=1e-6)
    assert cq == pytest.approx(2.0, rel=1e-6)
    assert hessian_constants(1) == pytest.approx((cu, cq), rel=1e-6)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_hessian_bounds_hold(L, rng):
    b = 0.3
    spec = make_potential("smoothed" if L == 1 else "higher_power", b, L, 3)
    hb = hessian_bound(spec)
    for _ in range(200):
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        lam = rng.normal(size=3) * rng.choice([0.1, 1, 5])
        f = Q @ np.diag(lam) @ Q.T
        f = 0.5 * (f + f.T)
        D = rng.normal(size=(3, 3))
        D = D + D.T
        H = abs(hessian_form(spec, f, D))
        n2 = np.sum(D * D)
        assert H <= hb.uniform * n2 * (1 + 1e-9)
        assert H <= hb.quadratic_coeff * potential_values(spec, f) * n2 * (1 + 1e-9)


def test_hessian_bound_rejects_singular():
    with pytest.raises(ConfigurationError):
        hessian_bound(make_potential("singular"))


def test_scaling_check_rejects():
    spec = make_potential("smoothed", 0.1)
    f = grassmannian_winding_field(build_domain(2, 12, 4.0))
    with pytest.raises(ConfigurationError):
        scaling_check(spec, f, 5)
    with pytest.raises(ConfigurationError):
        scaling_check(make_potential("higher_power", 0.1, 2), f, 2)
