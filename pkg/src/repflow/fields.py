"""Symmetric-matrix-valued lattice fields and their discrete derivatives.

A field stores the full ``(l, l)`` matrix at every site, exactly symmetric.
Spatial derivatives use periodic finite differences:

* ``spatial_gradient``: central differences, second order.
* ``kinetic_density``: edge-averaged squared forward differences, whose
  lattice sum is exactly the Dirichlet form of ``rough_laplacian``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError
from .lattice import LatticeDomain, SiteSet, site_set


def tri_indices(l: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major lower-triangle index pairs ``(i, j)`` with ``j <= i``."""
    return np.tril_indices(l)


@dataclass
class SymmetricMatrixField:
    """Real symmetric ``l x l`` matrix at every lattice site.

    Parameters
    ----------
    domain : LatticeDomain
    data : ndarray, shape ``domain.shape + (l, l)``
        Must be exactly symmetric and finite.
    t : float
        Time stamp.
    """

    domain: LatticeDomain
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        shape = self.domain.shape
        if data.ndim != self.domain.m + 2 or data.shape[: self.domain.m] != shape:
            raise ShapeError(f"field data shape {data.shape} does not match lattice {shape}")
        if data.shape[-1] != data.shape[-2] or data.shape[-1] < 1:
            raise ShapeError(f"site matrices must be square, got {data.shape[-2:]}")
        if not np.array_equal(data, np.swapaxes(data, -1, -2)):
            raise ShapeError("site matrices are not exactly symmetric")
        if not np.all(np.isfinite(data)):
            raise ShapeError("field contains non-finite entries")
        self.data = data

    @property
    def l(self) -> int:
        return self.data.shape[-1]

    def copy(self) -> "SymmetricMatrixField":
        return SymmetricMatrixField(self.domain, self.data.copy(), self.t)

    def packed(self) -> np.ndarray:
        """Lower-triangle entries per site, shape ``grid + (l(l+1)/2,)``."""
        i, j = tri_indices(self.l)
        return self.data[..., i, j]

    @classmethod
    def from_packed(cls, domain: LatticeDomain, packed: np.ndarray, l: int, t: float = 0.0):
        return cls(domain, unpack(packed, l), t)

    def site_matrix(self, site) -> np.ndarray:
        return self.data[self.domain.multi_index(site)]


def unpack(packed: np.ndarray, l: int) -> np.ndarray:
    """Inverse of :meth:`SymmetricMatrixField.packed`; result is exactly symmetric."""
    i, j = tri_indices(l)
    out = np.empty(packed.shape[:-1] + (l, l))
    out[..., i, j] = packed
    out[..., j, i] = packed
    return out


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy of a stack of square matrices."""
    l = a.shape[-1]
    i, j = tri_indices(l)
    return unpack(0.5 * (a[..., i, j] + a[..., j, i]), l)


@dataclass
class ScalarField:
    """Real value per site, e.g. an energy density."""

    domain: LatticeDomain
    values: np.ndarray
    label: str = ""

    def integral(self) -> float:
        return float(np.sum(self.values) * self.domain.cell_volume)

    def max(self) -> float:
        return float(np.max(self.values))

    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass
class GradientField:
    """Directional derivatives of a matrix field, ``data[j]`` along axis ``j``."""

    domain: LatticeDomain
    data: np.ndarray

    def norm2(self) -> np.ndarray:
        """Pointwise ``|df|^2 = sum_j |d_j f|_F^2``."""
        return np.einsum("j...ab,j...ab->...", self.data, self.data)


@dataclass
class EigenField:
    """Per-site spectral decomposition ``f = U diag(values) U^T``.

    ``frames[..., :, i]`` is the unit eigenvector for ``values[..., i]``;
    eigenvalues are ascending.  ``degenerate`` marks sites whose smallest
    adjacent gap is below ``gap_tol``.
    """

    domain: LatticeDomain
    values: np.ndarray
    frames: np.ndarray
    gap: np.ndarray
    gap_tol: float
    degenerate: np.ndarray = dc_field(repr=False)

    def degenerate_sites(self) -> SiteSet:
        return site_set(self.domain, self.degenerate)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("...ij,...j,...kj->...ik", self.frames, self.values, self.frames)


# ---------------------------------------------------------------------------
# Constructors


def constant_field(dom: LatticeDomain, matrix, t: float = 0.0) -> SymmetricMatrixField:
    """Field equal to ``matrix`` at every site."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    data = np.broadcast_to(a, dom.shape + a.shape).copy()
    return SymmetricMatrixField(dom, data, t)


def _smooth_perturbation(dom: LatticeDomain, seed: int, kmax: int = 2) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rngk = np.arange(-kmax, kmax + 1)
    modes = np.stack(np.meshgrid(*([rngk] * dom.m), indexing="ij"), -1).reshape(-1, dom.m)
    modes = modes[np.any(modes != 0, axis=1)]
    amp = rng.normal(size=len(modes)) / (1.0 + np.sum(modes**2, axis=1))
    phase = rng.uniform(0, 2 * np.pi, size=len(modes))
    x = np.stack(np.meshgrid(*([dom.axis_coords()] * dom.m), indexing="ij"), -1)
    arg = 2 * np.pi / dom.period * (x @ modes.T.astype(float)) + phase
    p = np.cos(arg) @ amp
    return p / np.max(np.abs(p))


def grassmannian_winding_field(
    dom: LatticeDomain,
    l: int = 2,
    k: int = 1,
    winding=None,
    seed: int = 0,
    amplitude: float = 0.1,
    scale: float = 1.0,
) -> SymmetricMatrixField:
    """Field with eigenvalues ``+-scale`` whose frame winds around the torus.

    One 2x2 reflection block ``[[cos a, sin a], [sin a, -cos a]]`` with
    ``a = 2 pi (winding . x) / P + amplitude * p(x)`` carries the winding;
    the remaining diagonal holds ``k - 1`` entries ``+1`` and ``l - k - 1``
    entries ``-1``.  ``p`` is a seeded trigonometric polynomial with
    ``max |p| = 1``.

    Parameters
    ----------
    winding : sequence of int, optional
        Turns per axis, default ``(1, 0, ..., 0)``.
    """
    if winding is None:
        winding = (1,) + (0,) * (dom.m - 1)
    winding = np.asarray(winding, dtype=float)
    if winding.shape != (dom.m,) or np.any(winding != np.round(winding)):
        raise ConfigurationError(f"winding must be {dom.m} integers, got {winding.tolist()}", "matrix.winding")
    if not 0 <= k <= l:
        raise ConfigurationError(f"signature k={k} outside [0, {l}]", "matrix.k")
    if k in (0, l) or l < 2:
        if np.any(winding != 0) or amplitude != 0:
            raise ConfigurationError("a winding frame needs eigenvalues of both signs", "matrix.k")
        return constant_field(dom, scale * (np.eye(l) if k == l else -np.eye(l)))
    x = np.stack(np.meshgrid(*([dom.axis_coords()] * dom.m), indexing="ij"), -1)
    angle = 2 * np.pi / dom.period * (x @ winding)
    if amplitude:
        angle = angle + amplitude * _smooth_perturbation(dom, seed)
    data = np.zeros(dom.shape + (l, l))
    c, s = np.cos(angle), np.sin(angle)
    data[..., 0, 0] = c
    data[..., 1, 1] = -c
    data[..., 0, 1] = s
    data[..., 1, 0] = s
    diag = [1.0] * (k - 1) + [-1.0] * (l - k - 1)
    for i, d in enumerate(diag):
        data[..., 2 + i, 2 + i] = d
    return SymmetricMatrixField(dom, scale * data)


# ---------------------------------------------------------------------------
# Differences


def _roll(a: np.ndarray, shift: int, axis: int) -> np.ndarray:
    return np.roll(a, shift, axis=axis)


def spatial_gradient(field: SymmetricMatrixField) -> GradientField:
    """Central differences ``(f(x + h e_j) - f(x - h e_j)) / 2h`` per axis."""
    h = field.domain.h
    f = field.data
    grad = np.stack([(_roll(f, -1, j) - _roll(f, 1, j)) / (2 * h) for j in range(field.domain.m)])
    return GradientField(field.domain, grad)


def forward_difference(field: SymmetricMatrixField, axis: int) -> np.ndarray:
    return (_roll(field.data, -1, axis) - field.data) / field.domain.h


def kinetic_density(field: SymmetricMatrixField) -> ScalarField:
    """Pointwise ``1/2 |df|^2`` with ``|d_j f|^2`` averaged over the two edges at each site.

    The lattice sum equals ``1/2 sum_j sum_x |D_j^+ f|^2``, the quadratic form
    of :func:`rough_laplacian`.
    """
    out = np.zeros(field.domain.shape)
    for j in range(field.domain.m):
        d = forward_difference(field, j)
        q = np.einsum("...ab,...ab->...", d, d)
        out += 0.25 * (q + _roll(q, 1, j))
    return ScalarField(field.domain, out, "kinetic")


def rough_laplacian(field: SymmetricMatrixField) -> SymmetricMatrixField:
    """Positive compact Laplacian ``d*df = -sum_j (f(x+h) - 2f + f(x-h)) / h^2``."""
    h2 = field.domain.h ** 2
    f = field.data
    acc = np.zeros_like(f)
    for j in range(field.domain.m):
        acc += _roll(f, -1, j) - 2 * f + _roll(f, 1, j)
    return SymmetricMatrixField(field.domain, -acc / h2, field.t)


def frobenius_sq(a: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...ab->...", a, a)


# ---------------------------------------------------------------------------
# Spectral data


def eigh_data(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched ascending eigendecomposition of symmetric matrices of any batch shape."""
    l = data.shape[-1]
    w, v = kernels.sym_eigh(np.ascontiguousarray(data).reshape(-1, l, l))
    return w.reshape(data.shape[:-1]), v.reshape(data.shape)


def eigen_decompose(field: SymmetricMatrixField, gap_tol: float | None = None) -> EigenField:
    """Eigendecomposition at every site with degeneracy flags.

    Parameters
    ----------
    gap_tol : float, optional
        Sites whose smallest gap between consecutive eigenvalues is below
        this value are flagged.  Default ``1e-8 * max |lambda|``.
    """
    w, v = eigh_data(field.data)
    if field.l > 1:
        gap = np.min(np.diff(w, axis=-1), axis=-1)
    else:
        gap = np.full(field.domain.shape, np.inf)
    if gap_tol is None:
        gap_tol = 1e-8 * float(np.max(np.abs(w))) if w.size else 0.0
    return EigenField(field.domain, w, v, gap, float(gap_tol), gap < gap_tol)


@dataclass
class KineticIdentity:
    """Comparison of ``|df|^2`` with its eigenbasis decomposition.

    Attributes
    ----------
    direct, eigen : ndarray
        ``|df|^2`` and ``sum_i |d lambda_i|^2 + sum_ij (lambda_i - lambda_j)^2 <d e_i, e_j>^2``.
    valid : ndarray of bool
        Sites used in the comparison.
    mismatch : float
        ``max |direct - eigen|`` over valid sites divided by ``max direct``.
    """

    direct: np.ndarray
    eigen: np.ndarray
    valid: np.ndarray
    mismatch: float


def eigen_kinetic_identity(field: SymmetricMatrixField, gap_tol: float | None = None) -> KineticIdentity:
    """Evaluate both sides of the eigenbasis form of ``|df|^2`` with central differences.

    Neighbouring frames are sign-aligned to the frame at the site before
    differencing.  Sites where the site or a neighbour is degenerate, or
    where alignment is ambiguous, are excluded.
    """
    dom = field.domain
    h = dom.h
    eig = eigen_decompose(field, gap_tol)
    lam, U = eig.values, eig.frames
    valid = ~eig.degenerate
    direct = spatial_gradient(field).norm2()
    total = np.zeros(dom.shape)
    for j in range(dom.m):
        parts = []
        for s in (-1, 1):
            Un = _roll(U, s, j)
            dots = np.einsum("...ai,...ai->...i", Un, U)
            valid &= np.all(np.abs(dots) > 0.5, axis=-1) & ~_roll(eig.degenerate, s, j)
            parts.append((Un * np.where(dots < 0, -1.0, 1.0)[..., None, :], _roll(lam, s, j)))
        (Up, lp), (Um, lm) = parts
        dU = (Up - Um) / (2 * h)
        dlam = (lp - lm) / (2 * h)
        A = np.einsum("...ai,...aj->...ij", U, dU)
        gaps = lam[..., :, None] - lam[..., None, :]
        total += np.sum(dlam**2, axis=-1) + np.einsum("...ij,...ij->...", gaps**2, A**2)
    if not np.any(valid):
        mismatch = float("nan")
    else:
        scale = float(np.max(direct[valid])) or 1.0
        mismatch = float(np.max(np.abs(direct - total)[valid])) / scale
    return KineticIdentity(direct, total, valid, mismatch)


def project_to_grassmannian(field: SymmetricMatrixField, tol: float = 1e-8):
    """Replace each site matrix by its sign, ``U sign(Lambda) U^T``.

    Returns
    -------
    projected : SymmetricMatrixField
    signature : ScalarField
        Number of positive eigenvalues per site.
    invalid : SiteSet
        Sites with an eigenvalue of magnitude ``<= tol * max(1, |lambda|_max)``;
        their sign is ill defined and they are left unchanged.
    """
    eig = eigen_decompose(field)
    lam, U = eig.values, eig.frames
    scale = max(1.0, float(np.max(np.abs(lam))))
    bad = np.any(np.abs(lam) <= tol * scale, axis=-1)
    sgn = np.sign(lam)
    proj = np.einsum("...ij,...j,...kj->...ik", U, sgn, U)
    proj = symmetrize(proj)
    proj[bad] = field.data[bad]
    sig = ScalarField(field.domain, np.sum(lam > 0, axis=-1).astype(float), "signature")
    return SymmetricMatrixField(field.domain, proj, field.t), sig, site_set(field.domain, bad)
