import numpy as np
import pytest

from conftest import smooth_field
from repflow.errors import ConfigurationError, ShapeError
from repflow.fields import (
    SymmetricMatrixField,
    constant_field,
    eigen_decompose,
    eigen_kinetic_identity,
    grassmannian_winding_field,
    kinetic_density,
    project_to_grassmannian,
    rough_laplacian,
    spatial_gradient,
    unpack,
)
from repflow.lattice import build_domain


def test_field_validation():
    dom = build_domain(2, 4)
    with pytest.raises(ShapeError):
        SymmetricMatrixField(dom, np.zeros((4, 5, 2, 2)))
    bad = np.zeros((4, 4, 2, 2))
    bad[0, 0, 0, 1] = 1.0
    with pytest.raises(ShapeError):
        SymmetricMatrixField(dom, bad)
    bad = np.zeros((4, 4, 2, 2))
    bad[1, 1, 0, 0] = np.nan
    with pytest.raises(ShapeError):
        SymmetricMatrixField(dom, bad)


def test_pack_unpack_round_trip():
    f = smooth_field(8, l=3)
    np.testing.assert_array_equal(unpack(f.packed(), 3), f.data)
    assert SymmetricMatrixField.from_packed(f.domain, f.packed(), 3).data.tobytes() == f.data.tobytes()


def test_winding_field_spectrum():
    dom = build_domain(2, 16, 2.0)
    f = grassmannian_winding_field(dom, 3, 1, amplitude=0.2, scale=1.5)
    eig = eigen_decompose(f)
    np.testing.assert_allclose(np.sort(eig.values, axis=-1), np.broadcast_to([-1.5, -1.5, 1.5], eig.values.shape),
                               atol=1e-12)
    assert eig.degenerate.all()  # the two -1.5 eigenvalues coincide


def test_winding_field_rejects():
    dom = build_domain(2, 8)
    with pytest.raises(ConfigurationError):
        grassmannian_winding_field(dom, 2, 3)
    with pytest.raises(ConfigurationError):
        grassmannian_winding_field(dom, 2, 1, winding=(1,))
    with pytest.raises(ConfigurationError):
        grassmannian_winding_field(dom, 2, 2, amplitude=0.1)


def test_constant_field_has_no_kinetic_energy():
    dom = build_domain(3, 6)
    f = constant_field(dom, np.diag([1.0, -2.0]))
    assert np.all(kinetic_density(f).values == 0)
    assert np.all(rough_laplacian(f).data == 0)


def test_kinetic_density_is_dirichlet_form():
    f = smooth_field(16, l=2)
    lhs = 2 * kinetic_density(f).integral()
    rhs = float(np.sum(f.data * rough_laplacian(f).data) * f.domain.cell_volume)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_gradient_of_linear_angle():
    dom = build_domain(2, 64, 1.0)
    f = grassmannian_winding_field(dom, amplitude=0.0)
    # |df|^2 = 2 k^2 for the reflection block; central differences see sin(kh)/h
    k = 2 * np.pi
    g = spatial_gradient(f).norm2()
    np.testing.assert_allclose(g, 2 * (np.sin(k * dom.h) / dom.h) ** 2, rtol=1e-12)


def test_kinetic_identity_on_smooth_field():
    rep = eigen_kinetic_identity(smooth_field(64))
    assert rep.valid.all()
    assert rep.mismatch < 0.02


def test_kinetic_identity_excludes_degenerate_sites():
    dom = build_domain(2, 8)
    rep = eigen_kinetic_identity(constant_field(dom, np.eye(2)))
    assert not rep.valid.any()
    assert np.isnan(rep.mismatch)


def test_projection_to_grassmannian():
    f = smooth_field(8, l=3)
    proj, sig, invalid = project_to_grassmannian(f)
    assert len(invalid) == 0
    sq = np.einsum("...ij,...jk->...ik", proj.data, proj.data)
    np.testing.assert_allclose(sq, np.broadcast_to(np.eye(3), sq.shape), atol=1e-12)
    np.testing.assert_array_equal(sig.values, np.sum(eigen_decompose(f).values > 0, axis=-1))
