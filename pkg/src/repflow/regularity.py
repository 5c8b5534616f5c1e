"""Moser bounds, epsilon-regularity scans, bad sets, coverings and sweeps.

Ball sups and integrals in this module use the closed lattice ball
``|o| h <= R``; the integral is the plain lattice sum times ``h^m``.
Parabolic cylinders are backward, ``B_R(x0) x [t0 - R^2, t0]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import trapezoid

from . import kernels
from .errors import ConfigurationError, EmptyRegionError, RepflowError, UndefinedRatioError
from .fields import ScalarField
from .lattice import LatticeDomain, SiteSet, ball_offsets, site_set
from .monotonicity import (
    Weighting,
    _Weights,
    as_centers,
    elliptic_phi_many,
    infimum_ratios,
    parabolic_psi,
    sample_of,
)
from .potentials import PotentialSpec

NEAR_STATIONARY = 1e-3


class CoverInvariantError(RepflowError, RuntimeError):
    """The greedy covering violated disjointness or the 3r coverage guarantee."""


def _values(e) -> tuple[LatticeDomain | None, np.ndarray]:
    if isinstance(e, ScalarField):
        return e.domain, np.asarray(e.values, dtype=float).ravel()
    return None, np.asarray(e, dtype=float).ravel()


def _ball_offs(dom: LatticeDomain, R: float) -> np.ndarray:
    if R <= 0:
        return np.zeros((1, dom.m), dtype=np.intp)
    return ball_offsets(dom, R)


def ball_sup(dom: LatticeDomain, values: np.ndarray, centers: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Max of ``values`` over closed balls of radius ``R`` (the center value when ``R = 0``)."""
    return kernels.stencil_max(np.asarray(values, float).ravel(), dom.shape, centers, _ball_offs(dom, R))


def ball_integral(dom: LatticeDomain, values: np.ndarray, centers: np.ndarray, R: float) -> np.ndarray:
    """Lattice integral ``h^m sum_{B_R} values`` around each center."""
    offs = _ball_offs(dom, R)
    w = np.full(offs.shape[0], dom.cell_volume)
    return kernels.stencil_sum(np.asarray(values, float).ravel()[None, :], dom.shape, centers, offs, w)[0]


def _center(dom: LatticeDomain, x) -> np.ndarray:
    return np.asarray(dom.multi_index(x), dtype=np.intp)[None, :]


def _check_delta(delta: float, upper: float = 1.0) -> None:
    if not 0 <= delta < upper:
        raise ConfigurationError(f"delta must lie in [0, {upper}), got {delta!r}", "analysis.delta")


# ---------------------------------------------------------------------------
# Moser bounds


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of a sup bound; ``passed`` iff ``ratio <= 1``."""

    label: str
    lhs: float
    rhs: float
    constants: dict
    ratio: float
    passed: bool


def _bound_check(label: str, lhs: float, rhs: float, constants: dict) -> BoundCheck:
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs <= 0 else math.inf
    return BoundCheck(label, float(lhs), float(rhs), constants, float(ratio), bool(ratio <= 1.0))


def minimal_C1(check: BoundCheck) -> float:
    """Smallest ``C1 >= 0`` for which a Moser check passes with its ``C0`` and ``C2``.

    Returns ``inf`` when no ``C1`` helps (``C0 = 0`` and the check fails).
    """
    if check.lhs <= check.rhs:
        return 0.0
    k = check.constants
    floor = k["C2"] / ((1 - k["delta"]) * k["R"]) ** 2
    base = k["C1"] * k["C0"] + floor
    need = base * (check.lhs / check.rhs) ** (1 / k["power"])
    if k["C0"] == 0:
        return math.inf
    return max(0.0, (need - floor) / k["C0"])


def moser_factor(C0: float, C1: float, C2: float, R: float, delta: float) -> float:
    """``C1 C0 + C2 / ((1 - delta) R)^2``."""
    return C1 * C0 + C2 / ((1 - delta) * R) ** 2


def moser_elliptic_check(e, C0: float, x0, R: float, delta: float, C1: float, C2: float,
                         domain: LatticeDomain | None = None) -> BoundCheck:
    """``sup_{B_dR} e <= (C1 C0 + C2/((1-d)R)^2)^(m/2) int_{B_R} e``.

    Parameters
    ----------
    e : ScalarField or ndarray
        Energy density (``domain`` is required for a bare array).
    """
    dom0, v = _values(e)
    dom = dom0 or domain
    if dom is None:
        raise ConfigurationError("a domain is required for array input")
    _check_delta(delta)
    if R >= dom.R_M * (1 + 1e-12):
        raise ConfigurationError(f"radius {R:.6g} not below R_M={dom.R_M:.6g}")
    c = _center(dom, x0)
    lhs = float(ball_sup(dom, v, c, delta * R)[0][0])
    integral = float(ball_integral(dom, v, c, R)[0])
    rhs = moser_factor(C0, C1, C2, R, delta) ** (dom.m / 2) * integral
    return _bound_check("moser_elliptic", lhs, rhs,
                        {"C0": C0, "C1": C1, "C2": C2, "delta": delta, "R": R, "power": dom.m / 2,
                         "x0": dom.flat_index(x0)})


def _window(times: np.ndarray, t0: float, tau: float) -> np.ndarray:
    tol = 1e-9 * max(1.0, abs(t0))
    return np.flatnonzero((times >= t0 - tau - tol) & (times <= t0 + tol))


def cylinder_integral(traj, x0, t0: float, R: float) -> tuple[float, np.ndarray]:
    """Trapezoidal space-time integral of ``e`` over the backward cylinder, with the snapshot indices used."""
    dom = traj.domain
    idx = _window(traj.times, t0, R * R)
    if idx.size < 2:
        raise EmptyRegionError(f"fewer than two snapshots in [t0 - R^2, t0] for t0={t0:.6g}, R={R:.6g}")
    c = _center(dom, x0)
    vals = np.array([ball_integral(dom, traj.energy_density(int(i)), c, R)[0] for i in idx])
    return float(trapezoid(vals, traj.times[idx])), idx


def cylinder_sup(traj, x0, t0: float, r: float) -> float:
    """Max of ``e`` over ``B_r(x0)`` and the snapshots in ``[t0 - r^2, t0]``."""
    dom = traj.domain
    idx = _window(traj.times, t0, r * r)
    if idx.size == 0:
        raise EmptyRegionError(f"no snapshot at t0={t0:.6g}")
    c = _center(dom, x0)
    return float(max(ball_sup(dom, traj.energy_density(int(i)), c, r)[0][0] for i in idx))


def moser_parabolic_check(traj, C0: float, z0, R: float, delta: float, C1: float, C2: float) -> BoundCheck:
    """``sup_{P_dR} e <= (C1 C0 + C2/((1-d)R)^2)^((m+2)/2) int_{P_R} e``.

    ``z0 = (x0, t0)`` with ``t0`` a snapshot time.

    Raises
    ------
    EmptyRegionError
        If fewer than two snapshots fall in ``[t0 - R^2, t0]``.
    """
    x0, t0 = z0
    dom = traj.domain
    _check_delta(delta)
    integral, _ = cylinder_integral(traj, x0, t0, R)
    lhs = cylinder_sup(traj, x0, t0, delta * R)
    rhs = moser_factor(C0, C1, C2, R, delta) ** ((dom.m + 2) / 2) * integral
    return _bound_check("moser_parabolic", lhs, rhs,
                        {"C0": C0, "C1": C1, "C2": C2, "delta": delta, "R": R, "power": (dom.m + 2) / 2,
                         "x0": dom.flat_index(x0), "t0": float(t0)})


# ---------------------------------------------------------------------------
# h(sigma)


@dataclass(frozen=True)
class HProfile:
    """``h(sigma) = (R1 - sigma)^(2 - p0) sup_{B_sigma} e`` with its maximizer."""

    sigmas: np.ndarray
    values: np.ndarray
    sigma0: float
    x1: int
    e0: float


def h_profile(e, x0, R1: float, p0: float, sigmas, domain: LatticeDomain | None = None) -> HProfile:
    """Evaluate ``h`` on the given ``sigma`` samples in ``[0, R1)``.

    ``x1`` is the site attaining ``sup_{B_sigma0} e`` and ``e0`` that value.
    """
    dom0, v = _values(e)
    dom = dom0 or domain
    if dom is None:
        raise ConfigurationError("a domain is required for array input")
    if R1 > 0.75 * dom.R_M * (1 + 1e-12):
        raise ConfigurationError(f"R1={R1:.6g} exceeds 3/4 R_M")
    s = np.asarray(sigmas, dtype=float)
    if np.any(s < 0) or np.any(s >= R1):
        raise ConfigurationError("sigma samples must lie in [0, R1)")
    c = _center(dom, x0)
    sups = np.empty(s.size)
    where = np.empty(s.size, dtype=np.int64)
    for i, sig in enumerate(s):
        b, w = ball_sup(dom, v, c, sig)
        sups[i], where[i] = b[0], w[0]
    vals = (R1 - s) ** (2 - p0) * sups
    k = int(np.argmax(vals))
    return HProfile(s, vals, float(s[k]), int(where[k]), float(sups[k]))


# ---------------------------------------------------------------------------
# Epsilon-regularity scans


def eps0_rule(spec: PotentialSpec, C: float) -> float:
    """``b^(1/L) / (2 C)``."""
    return _b_scale(spec) / (2 * C)


def _b_scale(spec: PotentialSpec) -> float:
    if spec.b == 0 or not math.isfinite(spec.b):
        return 1.0
    return spec.b ** (1 / spec.L)


def delta_log_rule(R: float, c: float, cap: float = 0.75) -> float:
    """``min(cap, c |ln R|^(-1/2))``; the cap applies near ``R = 1``."""
    lr = abs(math.log(R))
    return cap if lr == 0 else min(cap, c / math.sqrt(lr))


@dataclass
class EpsRegReport:
    """Scan of ``(center, R)`` probes.

    Arrays are indexed ``[center, radius]``; untriggered entries hold NaN.
    ``implied`` is ``sup_{dR} e (dR)^(2 - p) / b^(1/L)`` and ``implied_half``
    the same with ``dR/2``, where ``p = p0`` (elliptic) or ``2 nu0``
    (parabolic).  ``fixed_sigma`` (elliptic only) is
    ``sup_{B_{R/2}} e R^m / int_{B_R} (1 + nu) e``.
    """

    kind: str
    centers: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    eps0: float
    exponent: float
    delta: np.ndarray
    b_scale: float
    triggered: np.ndarray
    sup_delta: np.ndarray
    sup_half: np.ndarray
    implied: np.ndarray
    implied_half: np.ndarray
    fixed_sigma: np.ndarray | None = None
    t0: float | None = None
    info: dict = dc_field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not bool(np.any(self.triggered))

    @property
    def n_triggered(self) -> int:
        return int(np.sum(self.triggered))

    @staticmethod
    def _nanmax(a) -> float:
        if a is None or not np.any(np.isfinite(a)):
            return math.nan
        return float(np.nanmax(a))

    @property
    def max_implied(self) -> float:
        return self._nanmax(self.implied)

    @property
    def max_implied_half(self) -> float:
        return self._nanmax(self.implied_half)

    @property
    def max_fixed_sigma(self) -> float:
        return self._nanmax(self.fixed_sigma)

    def triggered_pairs(self) -> set:
        k, j = np.nonzero(self.triggered)
        return {(int(self.centers[a]), float(self.radii[b])) for a, b in zip(k, j)}

    def rows(self):
        """Per-probe rows ``(center, R, value, triggered, sup_delta, sup_half, implied, implied_half)``."""
        for a, c in enumerate(self.centers):
            for b, R in enumerate(self.radii):
                yield (int(c), float(R), float(self.values[a, b]), bool(self.triggered[a, b]),
                       float(self.sup_delta[a, b]), float(self.sup_half[a, b]),
                       float(self.implied[a, b]), float(self.implied_half[a, b]))


def default_scan_centers(dom: LatticeDomain, count: int = 64) -> np.ndarray:
    """Flat indices of a regular sub-grid with about ``count`` sites."""
    per_axis = max(1, int(round(count ** (1 / dom.m))))
    step = max(1, dom.n_per_axis // per_axis)
    axes = [np.arange(0, dom.n_per_axis, step)[:per_axis]] * dom.m
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dom.m)
    return np.ravel_multi_index(tuple(grid.T), dom.shape).astype(np.int64)


def default_scan_radii(dom: LatticeDomain) -> np.ndarray:
    """``{4, 6, 8, 12, 16} h`` restricted below ``R_M``."""
    r = np.array([4, 6, 8, 12, 16]) * dom.h
    return r[r < dom.R_M * (1 - 1e-12)]


def p0_or_zero(spec: PotentialSpec, sample, centers, rho: float) -> float:
    """``p0`` from :func:`infimum_ratios`, or 0 when the energy vanishes on every shell."""
    try:
        return infimum_ratios(spec, sample, centers, rho).p0
    except UndefinedRatioError:
        return 0.0


def _flat(dom: LatticeDomain, centers) -> np.ndarray:
    C = as_centers(dom, centers)
    return np.ravel_multi_index(tuple(C.T), dom.shape).astype(np.int64)


def epsilon_scan_elliptic(spec: PotentialSpec, field, eps0: float, radii=None, centers=None,
                          delta: float = 0.5, p0: float | None = None,
                          rho: float | None = None) -> EpsRegReport:
    """Scan the ``(1 + nu) e`` energy ``Phi`` and record sups where ``Phi <= eps0``.

    Parameters
    ----------
    field : SymmetricMatrixField or FieldSample
    eps0 : float
        Trigger threshold, e.g. :func:`eps0_rule`.
    p0 : float, optional
        Default from :func:`infimum_ratios` over the scan centers at scale ``rho``
        (default ``R_M / 2``).
    """
    s = sample_of(spec, field)
    dom = s.domain
    _check_delta(delta, 0.75 + 1e-12)
    radii = default_scan_radii(dom) if radii is None else np.asarray(radii, dtype=float)
    flat = default_scan_centers(dom) if centers is None else _flat(dom, centers)
    C = as_centers(dom, flat)
    flat = np.ravel_multi_index(tuple(C.T), dom.shape).astype(np.int64)
    if p0 is None:
        p0 = p0_or_zero(spec, s, flat, dom.R_M / 2 if rho is None else rho)
    K, NR = C.shape[0], radii.size
    vals = np.empty((K, NR))
    sup_d = np.full((K, NR), np.nan)
    sup_h = np.full((K, NR), np.nan)
    fixed = np.full((K, NR), np.nan)
    bs = _b_scale(spec)
    for j, R in enumerate(radii):
        phi = elliptic_phi_many(spec, s, C, R, p0, Weighting.CHAPTER_EPS)
        vals[:, j] = phi
        trig = phi <= eps0
        if not np.any(trig):
            continue
        Ct = C[trig]
        sup_d[trig, j] = ball_sup(dom, s.density, Ct, delta * R)[0]
        sup_h[trig, j] = ball_sup(dom, s.density, Ct, delta * R / 2)[0]
        # Phi = R^(2-m-p0) int (1+nu) e, so the fixed-sigma ratio needs only Phi
        integ = phi[trig] * R ** (dom.m + p0 - 2)
        sh = ball_sup(dom, s.density, Ct, R / 2)[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            fixed[trig, j] = np.where(integ > 0, sh * R**dom.m / np.where(integ > 0, integ, 1.0), 0.0)
    trig = vals <= eps0
    dR = delta * radii[None, :]
    implied = sup_d * dR ** (2 - p0) / bs
    implied_h = sup_h * (dR / 2) ** (2 - p0) / bs
    return EpsRegReport("elliptic", flat, radii, vals, float(eps0), float(p0), np.full(NR, delta), bs,
                        trig, sup_d, sup_h, implied, implied_h, fixed)


def initial_nu0(spec: PotentialSpec, traj, centers=None, rho: float | None = None) -> float:
    """``nu0`` of the initial snapshot over the scan region at scale ``rho`` (default ``R_M/2``)."""
    dom = traj.domain
    flat = default_scan_centers(dom) if centers is None else _flat(dom, centers)
    try:
        return infimum_ratios(spec, traj.snapshots[0], flat, dom.R_M / 2 if rho is None else rho).nu0
    except UndefinedRatioError:
        return 0.0


def default_parabolic_radii(traj, t0: float) -> np.ndarray:
    """Radii ``R`` on the lattice scale with ``4 R^2 <= t0 - t_min`` and ``R < R_M``."""
    dom = traj.domain
    rmax = min(math.sqrt(max(t0 - float(traj.times[0]), 0.0)) / 2, dom.R_M * (1 - 1e-12))
    cand = np.array([2, 3, 4, 6, 8, 12, 16]) * dom.h
    return cand[cand <= rmax * (1 + 1e-12)]


def epsilon_scan_parabolic(spec: PotentialSpec, traj, eps0: float, radii=None, centers=None,
                           t0: float | None = None, delta: float | str = 0.5, nu0: float | None = None,
                           delta_c: float = 0.5) -> EpsRegReport:
    """Scan ``Psi`` at ``(x0, t0)`` and record backward-cylinder sups where ``Psi <= eps0``.

    Parameters
    ----------
    t0 : float, optional
        A snapshot time, default the final time.
    delta : float or ``"log"``
        Fixed ratio or :func:`delta_log_rule` with constant ``delta_c``.
    nu0 : float, optional
        Default :func:`initial_nu0`.
    """
    dom = traj.domain
    t0 = float(traj.times[-1]) if t0 is None else float(t0)
    radii = default_parabolic_radii(traj, t0) if radii is None else np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise EmptyRegionError("no radius fits the stored time range")
    flat = default_scan_centers(dom) if centers is None else _flat(dom, centers)
    nu0 = initial_nu0(spec, traj, flat) if nu0 is None else nu0
    if delta == "log":
        deltas = np.array([delta_log_rule(R, delta_c) for R in radii])
    else:
        _check_delta(float(delta), 0.75 + 1e-12)
        deltas = np.full(radii.size, float(delta))
    K, NR = flat.size, radii.size
    vals = np.empty((K, NR))
    sup_d = np.full((K, NR), np.nan)
    sup_h = np.full((K, NR), np.nan)
    bs = _b_scale(spec)
    for a, x0 in enumerate(flat):
        W = _Weights.at(dom, int(x0))
        for j, R in enumerate(radii):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                vals[a, j] = parabolic_psi(spec, traj, (int(x0), t0), R, nu0, W).value
            if vals[a, j] <= eps0:
                sup_d[a, j] = cylinder_sup(traj, int(x0), t0, deltas[j] * R)
                sup_h[a, j] = cylinder_sup(traj, int(x0), t0, deltas[j] * R / 2)
    trig = vals <= eps0
    dR = deltas[None, :] * radii[None, :]
    implied = sup_d * dR ** (2 - 2 * nu0) / bs
    implied_h = sup_h * (dR / 2) ** (2 - 2 * nu0) / bs
    return EpsRegReport("parabolic", flat, radii, vals, float(eps0), float(2 * nu0), deltas, bs,
                        trig, sup_d, sup_h, implied, implied_h, None, t0)


# ---------------------------------------------------------------------------
# Bad sets and coverings


def bad_set(e, b: float, domain: LatticeDomain | None = None) -> SiteSet:
    """Sites where ``e >= 1/b``."""
    if not b > 0:
        raise ConfigurationError(f"b must be positive, got {b!r}", "potential.b")
    dom0, v = _values(e)
    dom = dom0 or domain
    if dom is None:
        raise ConfigurationError("a domain is required for array input")
    return site_set(dom, v >= 1.0 / b)


@dataclass(frozen=True)
class CoverReport:
    """Greedy disjoint-ball selection with its ``3r`` expansion.

    ``measure = J (3r)^d``.
    """

    r: float
    centers: SiteSet
    expansion: float
    covered: bool
    J: int
    measure: float
    d: float
    scale: float | None = None


def vitali_cover(dom: LatticeDomain, sites, r: float, d: float | None = None,
                 scale: float | None = None, order=None) -> CoverReport:
    """Greedy Vitali selection in site order (or the given ``order``).

    A site becomes a center if it lies more than ``2r`` from every accepted
    center.  Disjointness and ``3r`` coverage are verified.

    Raises
    ------
    CoverInvariantError
        If either guarantee fails.
    """
    if not r > 0:
        raise ConfigurationError(f"cover radius must be positive, got {r!r}")
    d = float(dom.m - 1) if d is None else float(d)
    ss = sites if isinstance(sites, SiteSet) else site_set(dom, sites)
    idx = ss.indices if order is None else np.asarray(order, dtype=np.int64)
    if idx.size == 0:
        return CoverReport(r, SiteSet(dom, idx), 3.0, True, 0, 0.0, d, scale)
    mi = np.stack(np.unravel_index(idx, dom.shape), axis=-1)
    pts = np.ascontiguousarray(mi * dom.h, dtype=float)
    acc = kernels.greedy_cover(pts, dom.period, r)
    cpts = pts[acc]
    if acc.size > 1:
        for i in range(acc.size):
            dd = kernels.min_sq_distance(cpts[i + 1:], cpts[i:i + 1], dom.period)
            if dd.size and np.min(dd) <= (2 * r) ** 2 * (1 - 1e-12):
                raise CoverInvariantError("accepted centers closer than 2r")
    dist = kernels.min_sq_distance(pts, cpts, dom.period)
    covered = bool(np.all(dist <= (3 * r) ** 2 * (1 + 1e-12)))
    if not covered:
        raise CoverInvariantError("a site lies farther than 3r from every center")
    J = int(acc.size)
    centers = SiteSet(dom, np.sort(idx[acc]))
    return CoverReport(r, centers, 3.0, covered, J, J * (3 * r) ** d, d, scale)


def cover_radius(b: float, c: float, L: int = 1) -> float:
    """``2 sqrt(4 c b^(1 + 1/L))``."""
    return 2 * math.sqrt(4 * c * b ** (1 + 1 / L))


def bad_set_dimension(m: int, L: int = 1) -> float:
    """``m - 1`` for ``L = 1`` and ``2/(L+1) + m - 2`` otherwise (equal at ``L = 1``)."""
    return 2 / (L + 1) + (m - 2)


@dataclass
class SweepTable:
    """Rows of a b-sweep with its column names."""

    columns: tuple
    rows: list
    summary: dict

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


HAUSDORFF_COLUMNS = ("b", "r", "J", "d", "H", "E0", "ratio", "stationary")


def _band(ratios: np.ndarray) -> tuple[float, bool]:
    if ratios.size == 0 or np.all(ratios == 0):
        return 1.0, True
    if np.any(ratios == 0):
        return math.inf, False
    return float(ratios.max() / ratios.min()), False


def hausdorff_sweep(runs, c: float, L: int = 1, band_limit: float = 3.0) -> SweepTable:
    """Bad-set measure at scale for each ``(b, trajectory)`` run.

    The final energy density of each run gives ``Sigma_b = {e >= 1/b}``,
    covered with ``r = 2 sqrt(4 c b^(1+1/L))`` in dimension
    :func:`bad_set_dimension`; ``ratio = H / E(f_0)``.

    The summary holds ``band`` (max/min ratio), ``bounded`` (band within
    ``band_limit``) and ``vacuous`` (every bad set empty).
    """
    rows = []
    for b, traj in runs:
        dom = traj.domain
        e = traj.energy_density(-1)
        S = bad_set(e, b, dom)
        d = bad_set_dimension(dom.m, L)
        rep = vitali_cover(dom, S, cover_radius(b, c, L), d, scale=b ** ((1 + L) / (2 * L)))
        E0 = traj.initial.total
        rows.append((float(b), rep.r, rep.J, d, rep.measure, E0, rep.measure / E0 if E0 else 0.0,
                     bool(traj.final_residual_ratio() <= NEAR_STATIONARY)))
    band, vacuous = _band(np.array([r[6] for r in rows]))
    return SweepTable(HAUSDORFF_COLUMNS, rows,
                      {"band": band, "bounded": band <= band_limit, "vacuous": vacuous, "c": c, "L": L})


SUP_E_COLUMNS = ("b", "sup_e", "E_b", "bound1", "bound2", "min_bound", "ratio", "stationary")


def sup_e_bounds(m: int, b: float, E_b: float) -> tuple[float, float]:
    """``b^(-m) E_b`` and ``E_b^(2m/(2m-2)) b^(-(2m-1)/(m-1))``."""
    return b ** (-m) * E_b, E_b ** (2 * m / (2 * m - 2)) * b ** (-(2 * m - 1) / (m - 1))


def sup_e_bound_sweep(runs, C: float) -> SweepTable:
    """Check ``sup e_b <= C min(bound1, bound2)`` on the final state of each run.

    The summary holds ``passed``, the smallest passing ``C`` and the
    log-log slope of ``sup e_b`` against ``b``.
    """
    rows = []
    for b, traj in runs:
        m = traj.domain.m
        e = traj.energy_density(-1)
        sup_e = float(np.max(e))
        E_b = float(np.sum(e) * traj.domain.cell_volume)
        b1, b2 = sup_e_bounds(m, b, E_b)
        mb = min(b1, b2)
        rows.append((float(b), sup_e, E_b, b1, b2, mb, sup_e / mb if mb > 0 else math.inf,
                     bool(traj.final_residual_ratio() <= NEAR_STATIONARY)))
    ratios = np.array([r[6] for r in rows])
    bs = np.array([r[0] for r in rows])
    sups = np.array([r[1] for r in rows])
    slope = float(np.polyfit(np.log(bs), np.log(sups), 1)[0]) if len(rows) > 1 and np.all(sups > 0) else math.nan
    need = float(ratios.max()) if ratios.size else 0.0
    return SweepTable(SUP_E_COLUMNS, rows, {"C": C, "passed": bool(need <= C), "min_C": need, "slope": slope})
