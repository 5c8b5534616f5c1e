"""Shell ratios, rescaled local energies and their monotonicity verdicts.

Elliptic side
    ``mu(R, x)`` and ``nu(R, x)`` are shell averages of the radial kinetic
    and the potential part of the energy density; their infima give the
    exponent ``p0 = (2 nu0 + (m - 2) mu0) / (1 - mu0)`` used to rescale the
    ball energy ``Phi(R) = R^(2 - m - p0) int_{B_R} (...)``.

Parabolic side
    Backward Gaussian ``G`` centred at a future point, a radial cutoff
    ``phi`` and the Gaussian-weighted energies ``phi(R)`` and ``Psi(R)``
    evaluated on stored trajectory snapshots.

Ball integrals use :func:`ball_weights`, a soft-edged quadrature rescaled
to the exact ball volume; shell integrals use the hard annulus of
:func:`repflow.lattice.shell_offsets` with weight ``h^m / width``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid

from . import kernels
from .errors import ConfigurationError, EmptyRegionError, UndefinedRatioError
from .fields import SymmetricMatrixField, kinetic_density, spatial_gradient
from .lattice import (
    LatticeDomain,
    SiteSet,
    ball_quadrature,
    offset_radii,
    periodic_distance,
    shell_offsets,
    site_set,
    wrapped_distance,
)
from .potentials import PotentialSpec, potential_density


class Weighting(str, Enum):
    """Integrand of the rescaled ball energy.

    ``CHAPTER_MONO``: ``1/2 |df|^2 + m/(m-2) W`` (requires ``m > 2``).
    ``CHAPTER_EPS``: ``(1 + nu(r, x)) e`` with ``nu`` taken per annulus.
    """

    CHAPTER_MONO = "chapter_mono"
    CHAPTER_EPS = "chapter_eps"


def ball_volume(m: int, R: float) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1) * R**m


@lru_cache(maxsize=512)
def _ball_weights_cached(dom: LatticeDomain, R: float) -> tuple[np.ndarray, np.ndarray]:
    offs, w = ball_quadrature(dom, R, soft=True)
    w = w * (ball_volume(dom.m, R) / np.sum(w))
    offs.setflags(write=False)
    w.setflags(write=False)
    return offs, w


def ball_weights(dom: LatticeDomain, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Soft-edged ball quadrature normalized to integrate constants exactly."""
    return _ball_weights_cached(dom, float(R))


def as_centers(dom: LatticeDomain, x) -> np.ndarray:
    """Convert a :class:`SiteSet`, flat indices, multi-indices or a mask into ``(K, m)`` multi-indices."""
    idx = x.indices if isinstance(x, SiteSet) else site_set(dom, x).indices
    return np.stack(np.unravel_index(idx, dom.shape), axis=-1).astype(np.intp)


def _single_center(dom: LatticeDomain, x) -> np.ndarray:
    return np.asarray(dom.multi_index(x), dtype=np.intp)[None, :]


# ---------------------------------------------------------------------------
# Cached per-field data


@dataclass
class FieldSample:
    """Pointwise quantities of one field reused across many shells and balls.

    Attributes
    ----------
    kinetic, potential, density : ndarray
        ``1/2|df|^2``, ``W`` and their sum, flattened.
    tensor : ndarray, shape (m, m, n_sites)
        ``<d_j f, d_k f>`` from central differences, for radial derivatives.
    """

    spec: PotentialSpec
    domain: LatticeDomain
    kinetic: np.ndarray
    potential: np.ndarray
    density: np.ndarray
    tensor: np.ndarray
    _binned_nu: dict = dc_field(default_factory=dict, repr=False)

    @classmethod
    def of(cls, spec: PotentialSpec, field: SymmetricMatrixField) -> "FieldSample":
        dom = field.domain
        kin = kinetic_density(field).values.ravel()
        pot = potential_density(spec, field).values.ravel()
        g = spatial_gradient(field).data
        T = np.einsum("j...ab,k...ab->jk...", g, g).reshape(dom.m, dom.m, -1)
        return cls(spec, dom, kin, pot, kin + pot, T)

    @classmethod
    def from_density(cls, spec: PotentialSpec, dom: LatticeDomain, kinetic: np.ndarray,
                     potential: np.ndarray) -> "FieldSample":
        """Sample without gradient data (radial ratios unavailable)."""
        kin = np.asarray(kinetic, dtype=float).ravel()
        pot = np.asarray(potential, dtype=float).ravel()
        return cls(spec, dom, kin, pot, kin + pot, np.zeros((dom.m, dom.m, 0)))


def sample_of(spec: PotentialSpec, obj) -> FieldSample:
    return obj if isinstance(obj, FieldSample) else FieldSample.of(spec, obj)


def _shell_data(dom: LatticeDomain, R: float, width: float | None):
    width = dom.h if width is None else width
    if R < 2 * dom.h * (1 - 1e-12):
        raise EmptyRegionError(f"shell radius {R:.6g} below 2h={2 * dom.h:.6g}")
    offs = shell_offsets(dom, R, width)
    if offs.shape[0] == 0:
        raise EmptyRegionError(f"shell of radius {R:.6g} contains no sites")
    return offs, dom.cell_volume / width


def shell_integrals(sample: FieldSample, centers: np.ndarray, R: float, width: float | None = None) -> dict:
    """Shell integrals of ``|f_r|^2``, ``W`` and ``e`` around each center.

    Returns
    -------
    dict with keys ``"radial"``, ``"potential"``, ``"energy"``, arrays of shape (K,).
    """
    dom = sample.domain
    offs, wt = _shell_data(dom, R, width)
    unit = offs * dom.h / offset_radii(dom, offs)[:, None]
    base = np.full(offs.shape[0], wt)
    pe = kernels.stencil_sum(np.stack([sample.potential, sample.density]), dom.shape, centers, offs, base)
    out = {"potential": pe[0], "energy": pe[1]}
    if sample.tensor.shape[-1] == 0:
        return out
    rows, weights = [], []
    for j in range(dom.m):
        for k in range(j, dom.m):
            rows.append(sample.tensor[j, k])
            weights.append((1.0 if j == k else 2.0) * wt * unit[:, j] * unit[:, k])
    radial = np.zeros(centers.shape[0])
    for v, w in zip(rows, weights):
        radial += kernels.stencil_sum(v[None, :], dom.shape, centers, offs, w)[0]
    out["radial"] = radial
    return out


def _ratio(num: np.ndarray, den: np.ndarray, fill: float = np.nan) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), fill)


def _defined(value: float, R: float) -> float:
    if not np.isfinite(value):
        raise UndefinedRatioError(f"energy vanishes on the shell of radius {R:.6g}")
    return float(value)


def mu_ratio(spec: PotentialSpec, field, x, R: float, width: float | None = None) -> float:
    """``int_{S_R} |f_r|^2 / int_{S_R} e`` on the lattice shell around ``x``.

    Raises
    ------
    EmptyRegionError
        If ``R < 2h`` or the shell has no sites.
    UndefinedRatioError
        If ``e`` vanishes on the shell.
    """
    s = sample_of(spec, field)
    si = shell_integrals(s, _single_center(s.domain, x), R, width)
    return _defined(_ratio(si["radial"], si["energy"])[0], R)


def nu_ratio(spec: PotentialSpec, field, x, R: float, width: float | None = None) -> float:
    """``int_{S_R} W / int_{S_R} e``; lies in ``[0, 1]``."""
    s = sample_of(spec, field)
    si = shell_integrals(FieldSample.from_density(spec, s.domain, s.kinetic, s.potential), _single_center(s.domain, x), R, width)
    return _defined(_ratio(si["potential"], si["energy"])[0], R)


def _nanmin(a: np.ndarray) -> float:
    return float(np.nanmin(a)) if np.any(np.isfinite(a)) else math.nan


@dataclass
class RatioProfile:
    """``mu`` and ``nu`` over sampled radii at one center, with their infima up to ``scale``.

    Shells on which ``e`` vanishes hold NaN and are skipped by the infima.
    """

    center: tuple
    radii: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    scale: float

    @property
    def mu_inf(self) -> float:
        return _nanmin(self.mu[self.radii <= self.scale * (1 + 1e-12)])

    @property
    def nu_inf(self) -> float:
        return _nanmin(self.nu[self.radii <= self.scale * (1 + 1e-12)])


def default_radii(dom: LatticeDomain, rho: float) -> np.ndarray:
    """Multiples of ``h`` from ``2h`` up to ``rho``."""
    k = np.arange(2, int(math.floor(rho / dom.h + 1e-9)) + 1)
    return k * dom.h


def ratio_profiles(spec: PotentialSpec, field, centers, radii, width: float | None = None,
                   scale: float | None = None) -> list[RatioProfile]:
    """``mu`` and ``nu`` for every center and radius (vectorized over centers)."""
    s = sample_of(spec, field)
    dom = s.domain
    C = as_centers(dom, centers)
    radii = np.asarray(radii, dtype=float)
    mu = np.empty((C.shape[0], radii.size))
    nu = np.empty_like(mu)
    for i, R in enumerate(radii):
        si = shell_integrals(s, C, R, width)
        mu[:, i] = _ratio(si["radial"], si["energy"])
        nu[:, i] = _ratio(si["potential"], si["energy"])
    sc = float(radii.max()) if scale is None else scale
    return [RatioProfile(tuple(int(v) for v in c), radii, mu[k], nu[k], sc) for k, c in enumerate(C)]


def ratio_profile(spec: PotentialSpec, field, x, radii, width: float | None = None,
                  scale: float | None = None) -> RatioProfile:
    return ratio_profiles(spec, field, _single_center(sample_of(spec, field).domain, x), radii, width, scale)[0]


def p0_exponent(mu0: float, nu0: float, m: int) -> float:
    """``(2 nu0 + (m - 2) mu0) / (1 - mu0)``.

    Raises
    ------
    ConfigurationError
        If ``mu0 >= 1``.
    """
    if mu0 >= 1:
        raise ConfigurationError(f"mu0={mu0:.6g} >= 1 leaves the exponent formula undefined")
    return (2 * nu0 + (m - 2) * mu0) / (1 - mu0)


@dataclass(frozen=True)
class InfimumRatios:
    mu0: float
    nu0: float
    p0: float
    mu_site: int
    nu_site: int
    radii: tuple


def infimum_ratios(spec: PotentialSpec, field, region, rho: float, radii=None,
                   width: float | None = None) -> InfimumRatios:
    """Infima of ``mu`` and ``nu`` over ``region`` and radii ``<= rho``, and ``p0``.

    Parameters
    ----------
    region : SiteSet or sequence of sites
    rho : float
        Largest radius, at most ``R_M``.
    radii : sequence of float, optional
        Sampled radii; default multiples of ``h`` in ``[2h, rho]``.

    Raises
    ------
    EmptyRegionError
        If fewer than three valid radii are available.
    ConfigurationError
        If ``rho > R_M`` or ``mu0 >= 1``.
    """
    s = sample_of(spec, field)
    dom = s.domain
    if rho > dom.R_M * (1 + 1e-12):
        raise ConfigurationError(f"scale rho={rho:.6g} exceeds R_M={dom.R_M:.6g}", "analysis.rho")
    radii = default_radii(dom, rho) if radii is None else np.asarray(radii, dtype=float)
    radii = radii[(radii <= rho * (1 + 1e-12)) & (radii >= 2 * dom.h * (1 - 1e-12))]
    if radii.size < 3:
        raise EmptyRegionError(f"only {radii.size} valid shells with 2h <= R <= rho={rho:.6g}")
    profs = ratio_profiles(s.spec, s, region, radii, width, rho)
    mus = np.array([p.mu_inf for p in profs])
    nus = np.array([p.nu_inf for p in profs])
    if not np.any(np.isfinite(mus)):
        raise UndefinedRatioError("energy vanishes on every sampled shell of the region")
    C = as_centers(dom, region)
    i, j = int(np.nanargmin(mus)), int(np.nanargmin(nus))
    mu0, nu0 = float(mus[i]), float(nus[j])
    p0 = p0_exponent(mu0, nu0, dom.m)
    flat = np.ravel_multi_index(tuple(C.T), dom.shape)
    return InfimumRatios(mu0, nu0, p0, int(flat[i]), int(flat[j]), tuple(radii.tolist()))


# ---------------------------------------------------------------------------
# Rescaled ball energies


def _binned_nu(sample: FieldSample, centers: np.ndarray, offs: np.ndarray) -> np.ndarray:
    """``nu`` on annuli ``|o| in [(k - 1/2) h, (k + 1/2) h)`` for every offset, shape (K, Q)."""
    dom = sample.domain
    bins = np.floor(np.sqrt(np.sum(offs * offs, axis=1)) + 0.5).astype(int)
    out = np.empty((centers.shape[0], offs.shape[0]))
    for k in np.unique(bins):
        sel = bins == k
        ones = np.ones(int(sel.sum()))
        pe = kernels.stencil_sum(np.stack([sample.potential, sample.density]), dom.shape, centers, offs[sel], ones)
        # e = 0 on the annulus makes the weight irrelevant
        out[:, sel] = _ratio(pe[0], pe[1], 0.0)[:, None]
    return out


def elliptic_phi_many(spec: PotentialSpec, field, centers, R: float, p0: float,
                      weighting: Weighting | str = Weighting.CHAPTER_EPS) -> np.ndarray:
    """Vectorized :func:`elliptic_phi` over several centers."""
    weighting = Weighting(weighting)
    s = sample_of(spec, field)
    dom = s.domain
    if weighting is Weighting.CHAPTER_MONO and dom.m <= 2:
        raise ConfigurationError("the m/(m-2) weighting requires m > 2", "analysis.weighting")
    if R >= dom.R_M * (1 + 1e-12):
        raise ConfigurationError(f"radius {R:.6g} not below R_M={dom.R_M:.6g}")
    C = as_centers(dom, centers)
    offs, w = ball_weights(dom, R)
    scale = R ** (2 - dom.m - p0)
    if weighting is Weighting.CHAPTER_MONO:
        integrand = s.kinetic + dom.m / (dom.m - 2) * s.potential
        return scale * kernels.stencil_sum(integrand[None, :], dom.shape, C, offs, w)[0]
    nu = _binned_nu(s, C, offs)
    out = np.empty(C.shape[0])
    for k in range(C.shape[0]):
        out[k] = kernels.stencil_sum(s.density[None, :], dom.shape, C[k:k + 1], offs, w * (1 + nu[k]))[0, 0]
    return scale * out


def elliptic_phi(spec: PotentialSpec, field, x, R: float, p0: float,
                 weighting: Weighting | str = Weighting.CHAPTER_MONO) -> float:
    """Rescaled ball energy ``R^(2 - m - p0) int_{B_R(x)} integrand``.

    Raises
    ------
    ConfigurationError
        For ``CHAPTER_MONO`` when ``m = 2``, or ``R >= R_M``.
    """
    s = sample_of(spec, field)
    return float(elliptic_phi_many(spec, s, _single_center(s.domain, x), R, p0, weighting)[0])


@dataclass
class MonotonicityVerdict:
    """Outcome of a monotonicity or inequality check.

    ``violation`` is signed; the check passes when ``violation <= tolerance``.
    """

    name: str
    samples: list
    values: list
    violation: float
    tolerance: float
    passed: bool
    details: dict = dc_field(default_factory=dict)


def _consecutive_violation(values: np.ndarray) -> float:
    a, b = values[:-1], values[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(b != 0, (a - b) / np.abs(np.where(b != 0, b, 1.0)), np.where(a > 0, np.inf, 0.0))
    return float(np.max(rel)) if rel.size else 0.0


def phi_monotonicity_verdict(spec: PotentialSpec, field, x, radii, p0: float, slack: float = 1e-2,
                             weighting: Weighting | str | None = None) -> MonotonicityVerdict:
    """Check that ``Phi(R)`` does not decrease over ascending ``radii``.

    The default weighting is ``CHAPTER_MONO`` for ``m > 2`` and
    ``CHAPTER_EPS`` for ``m = 2``, where the former is undefined.
    """
    s = sample_of(spec, field)
    if weighting is None:
        weighting = Weighting.CHAPTER_MONO if s.domain.m > 2 else Weighting.CHAPTER_EPS
    weighting = Weighting(weighting)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ConfigurationError("radii must be strictly ascending")
    vals = np.array([elliptic_phi(spec, s, x, R, p0, weighting) for R in radii])
    v = _consecutive_violation(vals)
    return MonotonicityVerdict(f"phi_{weighting.value}", radii.tolist(), vals.tolist(), v, slack, v <= slack,
                               {"p0": p0, "center": s.domain.flat_index(x)})


# ---------------------------------------------------------------------------
# Parabolic quantities


def _gauss(m: int, d2: np.ndarray, tau: float) -> np.ndarray:
    return (4 * math.pi * tau) ** (-m / 2) * np.exp(-d2 / (4 * tau))


def backward_gaussian(dom: LatticeDomain, x0, t0: float, x, t: float) -> float:
    """``(4 pi (t0 - t))^(-m/2) exp(-d^2 / 4 (t0 - t))`` with torus distance ``d``.

    ``x0`` and ``x`` are sites.

    Raises
    ------
    ConfigurationError
        If ``t >= t0``.
    """
    if not t < t0:
        raise ConfigurationError(f"backward Gaussian needs t < t0, got t={t!r}, t0={t0!r}")
    d = periodic_distance(dom, x0, x)
    return float(_gauss(dom.m, np.array(d * d), t0 - t))


def gaussian_field(dom: LatticeDomain, x0, t0: float, t: float) -> np.ndarray:
    """Backward Gaussian at every site, shape ``dom.shape``."""
    if not t < t0:
        raise ConfigurationError(f"backward Gaussian needs t < t0, got t={t!r}, t0={t0!r}")
    d = dom.displacement_field(x0)
    return _gauss(dom.m, np.sum(d * d, axis=-1), t0 - t)


def cutoff_profile(d, R_M: float):
    """Radial cutoff: 1 on ``[0, R_M/2]``, 0 beyond ``R_M``, cubic in between.

    The cubic ``1 - 3 s^2 + 2 s^3`` in ``s = (d - R_M/2) / (R_M/2)`` is C1
    and monotone with ``max |phi'| = 3 / R_M``.
    """
    s = np.clip((np.asarray(d, dtype=float) - R_M / 2) / (R_M / 2), 0.0, 1.0)
    return 1 - 3 * s**2 + 2 * s**3


def cutoff_phi(dom: LatticeDomain, x0, x=None):
    """Cutoff centred at ``x0``: at site ``x``, or on the whole lattice when ``x`` is None."""
    if x is None:
        return cutoff_profile(dom.distance_field(x0), dom.R_M)
    return float(cutoff_profile(periodic_distance(dom, x0, x), dom.R_M))


@dataclass
class _Weights:
    """Spatial weights ``G phi^2 h^m`` for one (x0, t0, t)."""

    dom: LatticeDomain
    x0: tuple
    phi2: np.ndarray
    d2: np.ndarray

    @classmethod
    def at(cls, dom: LatticeDomain, x0) -> "_Weights":
        d = dom.displacement_field(x0)
        d2 = np.sum(d * d, axis=-1).ravel()
        return cls(dom, dom.multi_index(x0), cutoff_profile(np.sqrt(d2), dom.R_M) ** 2, d2)

    def integral(self, e: np.ndarray, tau: float) -> float:
        g = _gauss(self.dom.m, self.d2, tau)
        return float(np.dot(g * self.phi2, e.ravel()) * self.dom.cell_volume)


def _density_at(traj, t: float) -> np.ndarray:
    """Energy density at time ``t``: a stored snapshot or a linear interpolation."""
    times = traj.times
    tol = 1e-9 * max(1.0, abs(t))
    hit = np.flatnonzero(np.abs(times - t) <= tol)
    if hit.size:
        return traj.energy_density(int(hit[0]))
    j = int(np.searchsorted(times, t))
    if j == 0 or j >= times.size:
        raise EmptyRegionError(f"time {t:.6g} outside the stored snapshots")
    spacing = float(np.median(np.diff(times))) if times.size > 1 else 0.0
    gap = times[j] - times[j - 1]
    if gap > 2 * spacing * (1 + 1e-9):
        raise EmptyRegionError(f"snapshot gap {gap:.6g} around t={t:.6g} exceeds twice the stride")
    a = (t - times[j - 1]) / gap
    return (1 - a) * traj.energy_density(j - 1) + a * traj.energy_density(j)


def parabolic_small_phi(spec: PotentialSpec, traj, x0, t0: float, t: float, nu0: float) -> float:
    """``(t0 - t)^(1 - nu0) sum_x G e phi^2 h^m`` at time ``t``.

    Raises
    ------
    ConfigurationError
        If ``t >= t0`` or ``t0 - t > R_M^2``.
    EmptyRegionError
        If no snapshot (or admissible interpolation) exists at ``t``.
    """
    dom = traj.domain
    tau = t0 - t
    if not tau > 0:
        raise ConfigurationError("parabolic quantities need t < t0")
    if tau > dom.R_M**2 * (1 + 1e-12):
        raise ConfigurationError(f"t0 - t = {tau:.6g} exceeds R_M^2 = {dom.R_M ** 2:.6g}")
    e = _density_at(traj, t)
    return tau ** (1 - nu0) * _Weights.at(dom, x0).integral(e, tau)


@dataclass(frozen=True)
class PsiValue:
    """``Psi`` with the quadrature nodes used and the covered fraction of the strip."""

    value: float
    nodes: tuple
    coverage: float
    low_coverage: bool


def _psi_nodes(traj, lo: float, hi: float):
    times = traj.times
    tol = 1e-9 * max(1.0, abs(hi))
    inside = np.flatnonzero((times >= lo - tol) & (times <= hi + tol))
    nodes = [(float(times[i]), ("snap", int(i))) for i in inside]
    spacing = float(np.median(np.diff(times))) if times.size > 1 else 0.0
    for edge in (lo, hi):
        if any(abs(tn - edge) <= tol for tn, _ in nodes):
            continue
        j = int(np.searchsorted(times, edge))
        if 0 < j < times.size and times[j] - times[j - 1] <= 2 * spacing * (1 + 1e-9):
            nodes.append((edge, ("interp", j)))
    nodes.sort(key=lambda n: n[0])
    return nodes


def parabolic_psi(spec: PotentialSpec, traj, z0, R: float, nu0: float, _weights: _Weights | None = None) -> PsiValue:
    """Trapezoidal ``int_{t0-4R^2}^{t0-R^2} (t0 - t)^(-nu0) sum_x G e phi^2 h^m dt``.

    Strip endpoints that fall between two snapshots are evaluated by
    linear interpolation of the energy density.  A coverage below 80% of
    the strip sets ``low_coverage`` and emits a warning.

    Raises
    ------
    EmptyRegionError
        If the strip contains no usable node.
    """
    x0, t0 = z0
    dom = traj.domain
    if not R > 0:
        raise ConfigurationError("Psi needs R > 0")
    lo, hi = t0 - 4 * R * R, t0 - R * R
    nodes = _psi_nodes(traj, lo, hi)
    if not nodes:
        raise EmptyRegionError(f"no snapshot in the strip [{lo:.6g}, {hi:.6g}]")
    W = _weights or _Weights.at(dom, x0)
    ts = np.array([n[0] for n in nodes])
    vals = np.empty(ts.size)
    for k, (tn, (kind, j)) in enumerate(nodes):
        e = traj.energy_density(j) if kind == "snap" else _density_at(traj, tn)
        tau = t0 - tn
        vals[k] = tau ** (-nu0) * W.integral(e, tau)
    value = float(trapezoid(vals, ts)) if ts.size > 1 else 0.0
    coverage = float((ts[-1] - ts[0]) / (hi - lo))
    low = coverage < 0.8
    if low:
        warnings.warn(f"Psi strip coverage {coverage:.0%} below 80%", RuntimeWarning, stacklevel=2)
    return PsiValue(value, tuple(ts.tolist()), coverage, low)


def psi_inequality_verdict(spec: PotentialSpec, traj, z0, R: float, R0: float, E0: float,
                           c: float = 0.0, C_hat: float = 0.0, nu0: float = 0.0) -> MonotonicityVerdict:
    """Check ``Psi(R) <= exp(c (R0^2 - R^2)) Psi(R0) + C_hat E0 (R0^2 - R^2)``.

    ``violation`` is ``lhs - rhs`` relative to ``max(rhs, tiny)``; the
    verdict also records the smallest ``C_hat`` that passes with ``c = 0``.
    """
    if not 0 < R <= R0:
        raise ConfigurationError(f"need 0 < R <= R0, got R={R!r}, R0={R0!r}")
    W = _Weights.at(traj.domain, z0[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = parabolic_psi(spec, traj, z0, R, nu0, W)
        b = parabolic_psi(spec, traj, z0, R0, nu0, W)
    gap = R0 * R0 - R * R
    lhs = a.value
    rhs = math.exp(c * gap) * b.value + C_hat * E0 * gap
    tiny = 1e-300
    # round-off slack for the R = R0 identity and equal quadratures
    slack = 1e-12 * max(abs(lhs), abs(rhs))
    violation = (lhs - rhs - slack) / max(abs(rhs), tiny)
    if gap > 0 and E0 > 0:
        min_C = max(0.0, (a.value - b.value) / (E0 * gap))
    else:
        min_C = 0.0 if a.value <= b.value * (1 + 1e-12) else math.inf
    return MonotonicityVerdict(
        "psi_inequality", [R, R0], [lhs, rhs], violation, 0.0, violation <= 0.0,
        {"psi_R": a.value, "psi_R0": b.value, "min_C_hat": min_C, "c": c, "C_hat": C_hat,
         "coverage": min(a.coverage, b.coverage), "nu0": nu0},
    )


def gaussian_recentring_constant(m: int, rho: float) -> float:
    """``(12 pi)^(-m/2) e^(-1/4) rho^(-m)``."""
    return (12 * math.pi) ** (-m / 2) * math.exp(-0.25) * rho ** (-m)


def gaussian_recentred_lower_bound_check(dom: LatticeDomain, z1, rho: float, z) -> tuple[float, float]:
    """Backward Gaussian centred at ``(x1, t1 + 2 rho^2)`` evaluated at ``z`` and its lower bound.

    ``z1 = (x1, t1)`` and ``z = (x, t)`` use coordinates (arrays of length
    ``m``) so that samples need not sit on lattice sites.  ``z`` should lie
    in the parabolic cylinder ``P_rho(z1)``.
    """
    (x1, t1), (x, t) = z1, z
    tau = t1 + 2 * rho * rho - t
    d = float(wrapped_distance(dom, np.asarray(x1, float), np.asarray(x, float)))
    lhs = float(_gauss(dom.m, np.array(d * d), tau))
    return lhs, gaussian_recentring_constant(dom.m, rho)
