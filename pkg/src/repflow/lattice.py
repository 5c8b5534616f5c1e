"""Periodic cubic lattices, balls, shells and space-time windows.

Sites are numbered row-major over an ``n ** m`` grid with coordinates
``x = i * h``.  Distances are measured on the torus (nearest image).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, EmptyRegionError

# Relative tolerance used when comparing squared lattice radii.
_RADIUS_RTOL = 1e-10


@dataclass(frozen=True)
class LatticeDomain:
    """Periodic cubic lattice ``(Z/n)^m`` with spacing ``period / n``.

    Use :func:`build_domain` to construct validated instances.
    """

    m: int
    n_per_axis: int
    period: float

    @property
    def h(self) -> float:
        return self.period / self.n_per_axis

    @property
    def R_M(self) -> float:
        """Largest admissible analysis radius, a quarter period."""
        return self.period / 4.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.m

    @property
    def n_sites(self) -> int:
        return self.n_per_axis**self.m

    @property
    def cell_volume(self) -> float:
        return self.h**self.m

    @property
    def volume(self) -> float:
        return self.period**self.m

    def multi_index(self, site) -> tuple[int, ...]:
        """Return the multi-index of ``site`` (flat int or index tuple)."""
        if np.ndim(site) == 0:
            s = int(site)
            if not 0 <= s < self.n_sites:
                raise ConfigurationError(f"site {s} outside lattice of {self.n_sites} sites")
            return tuple(int(i) for i in np.unravel_index(s, self.shape))
        idx = tuple(int(i) for i in site)
        if len(idx) != self.m:
            raise ConfigurationError(f"site index {idx} has wrong dimension for m={self.m}")
        return tuple(i % self.n_per_axis for i in idx)

    def flat_index(self, site) -> int:
        return int(np.ravel_multi_index(self.multi_index(site), self.shape))

    def coords(self, site) -> np.ndarray:
        """Coordinates of a site in ``[0, period)^m``."""
        return np.asarray(self.multi_index(site), dtype=float) * self.h

    def all_coords(self) -> np.ndarray:
        """Coordinates of every site, shape ``(n_sites, m)`` in row-major order."""
        grids = np.indices(self.shape).reshape(self.m, -1).T
        return grids.astype(float) * self.h

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n_per_axis) * self.h

    def wrap(self, delta: np.ndarray) -> np.ndarray:
        """Map coordinate differences to the nearest image in ``[-P/2, P/2)``."""
        P = self.period
        return delta - P * np.floor(delta / P + 0.5)

    def displacement_field(self, center) -> np.ndarray:
        """Wrapped displacement from ``center`` to every site, shape ``grid + (m,)``."""
        c = self.coords(center)
        out = np.empty(self.shape + (self.m,))
        ax = self.axis_coords()
        for j in range(self.m):
            d = self.wrap(ax - c[j])
            view = [1] * self.m
            view[j] = self.n_per_axis
            out[..., j] = d.reshape(view)
        return out

    def distance_field(self, center) -> np.ndarray:
        """Torus distance from ``center`` to every site, shape ``grid``."""
        return np.sqrt(np.sum(self.displacement_field(center) ** 2, axis=-1))


def build_domain(m: int, n_per_axis: int, period: float = 1.0) -> LatticeDomain:
    """Validate parameters and return a :class:`LatticeDomain`.

    Raises
    ------
    ConfigurationError
        If ``m < 2``, ``n_per_axis < 4`` or ``period <= 0``.
    """
    if isinstance(m, bool) or int(m) != m or m < 2:
        raise ConfigurationError(f"dimension must be an integer >= 2, got {m!r}", "domain.m")
    if isinstance(n_per_axis, bool) or int(n_per_axis) != n_per_axis or n_per_axis < 4:
        raise ConfigurationError(
            f"sites per axis must be an integer >= 4, got {n_per_axis!r}", "domain.n_per_axis"
        )
    if not (np.isfinite(period) and period > 0):
        raise ConfigurationError(f"period must be positive and finite, got {period!r}", "domain.period")
    return LatticeDomain(int(m), int(n_per_axis), float(period))


def cell_volume(dom: LatticeDomain) -> float:
    """Quadrature weight ``h ** m`` of one lattice site."""
    return dom.cell_volume


def wrapped_distance(dom: LatticeDomain, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Torus distance between coordinate arrays (last axis of length ``m``)."""
    d = dom.wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    return np.sqrt(np.sum(d * d, axis=-1))


def periodic_distance(dom: LatticeDomain, x, y) -> float:
    """Torus distance between two sites.

    Per axis the separation is ``min(|dx|, P - |dx|)``.
    """
    a = np.asarray(dom.multi_index(x))
    b = np.asarray(dom.multi_index(y))
    n = dom.n_per_axis
    k = np.abs(a - b) % n
    k = np.minimum(k, n - k)
    return float(dom.h * math.sqrt(float(np.sum(k * k))))


@dataclass(frozen=True)
class SiteSet:
    """Sorted, duplicate free set of flat site indices on a domain."""

    domain: LatticeDomain
    indices: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, site) -> bool:
        s = self.domain.flat_index(site)
        i = np.searchsorted(self.indices, s)
        return bool(i < self.indices.size and self.indices[i] == s)

    def coords(self) -> np.ndarray:
        mi = np.stack(np.unravel_index(self.indices, self.domain.shape), axis=-1)
        return mi.astype(float) * self.domain.h

    def mask(self) -> np.ndarray:
        out = np.zeros(self.domain.n_sites, dtype=bool)
        out[self.indices] = True
        return out.reshape(self.domain.shape)


def site_set(dom: LatticeDomain, sites) -> SiteSet:
    """Build a :class:`SiteSet` from flat indices, multi-indices or a mask."""
    arr = np.asarray(sites)
    if arr.dtype == bool:
        if arr.shape != dom.shape and arr.shape != (dom.n_sites,):
            raise ConfigurationError("mask shape does not match domain")
        idx = np.flatnonzero(arr.ravel())
    elif arr.ndim == 2 and arr.shape[1] == dom.m:
        idx = np.ravel_multi_index(tuple((arr % dom.n_per_axis).T), dom.shape)
    else:
        idx = arr.astype(np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= dom.n_sites):
            raise ConfigurationError("site index outside lattice")
    return SiteSet(dom, np.unique(idx).astype(np.int64))


# ---------------------------------------------------------------------------
# Offset stencils


@functools.lru_cache(maxsize=256)
def _offset_block(m: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.arange(-kmax, kmax + 1)
    offs = np.stack(np.meshgrid(*([rng] * m), indexing="ij"), axis=-1).reshape(-1, m)
    r2 = np.sum(offs * offs, axis=1)
    order = np.lexsort(tuple(offs[:, ::-1].T) + (r2,))
    offs = offs[order]
    offs.setflags(write=False)
    r2 = r2[order]
    r2.setflags(write=False)
    return offs, r2


def _check_radius(dom: LatticeDomain, R: float, reach: float | None = None) -> None:
    if not (np.isfinite(R) and R > 0):
        raise ConfigurationError(f"radius must be positive, got {R!r}")
    reach = R if reach is None else reach
    if reach >= dom.period / 2:
        raise ConfigurationError(
            f"radius {R:.6g} reaches past half the period {dom.period / 2:.6g}"
        )


def ball_offsets(dom: LatticeDomain, R: float) -> np.ndarray:
    """Integer offsets ``o`` with ``|o| h <= R``, sorted by radius."""
    _check_radius(dom, R)
    q = R / dom.h
    offs, r2 = _offset_block(dom.m, int(math.floor(q)) + 1)
    return offs[r2 <= q * q * (1 + _RADIUS_RTOL)]


def shell_offsets(dom: LatticeDomain, R: float, width: float) -> np.ndarray:
    """Integer offsets with ``R - width/2 <= |o| h < R + width/2``."""
    if not (np.isfinite(width) and width > 0):
        raise ConfigurationError(f"shell width must be positive, got {width!r}")
    _check_radius(dom, R, R + width / 2)
    lo = max(R - width / 2, 0.0) / dom.h
    hi = (R + width / 2) / dom.h
    offs, r2 = _offset_block(dom.m, int(math.floor(hi)) + 1)
    keep = (r2 >= lo * lo * (1 - _RADIUS_RTOL)) & (r2 < hi * hi * (1 - _RADIUS_RTOL))
    return offs[keep]


def _translate(dom: LatticeDomain, center, offs: np.ndarray) -> np.ndarray:
    c = np.asarray(dom.multi_index(center))
    pts = (offs + c) % dom.n_per_axis
    return np.ravel_multi_index(tuple(pts.T), dom.shape).astype(np.int64)


def ball_sites(dom: LatticeDomain, center, R: float) -> SiteSet:
    """Sites within torus distance ``R`` of ``center`` (closed ball).

    Raises
    ------
    ConfigurationError
        Unless ``0 < R < period / 2``.
    """
    return SiteSet(dom, np.sort(_translate(dom, center, ball_offsets(dom, R))))


def shell_sites(dom: LatticeDomain, center, R: float, width: float | None = None) -> SiteSet:
    """Sites in the half-open annulus ``R - w/2 <= d < R + w/2`` (default ``w = h``).

    Raises
    ------
    EmptyRegionError
        If no lattice site falls in the annulus.
    """
    width = dom.h if width is None else width
    offs = shell_offsets(dom, R, width)
    if offs.shape[0] == 0:
        raise EmptyRegionError(f"shell of radius {R:.6g} and width {width:.6g} contains no sites")
    return SiteSet(dom, np.sort(_translate(dom, center, offs)))


def shell_weight(dom: LatticeDomain, width: float | None = None) -> float:
    """Per-site weight ``h^m / width`` turning shell sums into surface integrals."""
    width = dom.h if width is None else width
    return dom.cell_volume / width


def ball_quadrature(dom: LatticeDomain, R: float, soft: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights for integrating over ``B_R``.

    With ``soft=True`` each site is weighted by the fraction of a cell of
    width ``h`` centred at its radius that lies inside the ball,
    ``clip((R - d)/h + 1/2, 0, 1)``.  This removes the jumps of the plain
    site count as ``R`` crosses lattice shells.

    Returns
    -------
    offsets : ndarray of int, shape (Q, m)
    weights : ndarray, shape (Q,)
        Including the cell volume ``h^m``.
    """
    if not soft:
        offs = ball_offsets(dom, R)
        return offs, np.full(offs.shape[0], dom.cell_volume)
    _check_radius(dom, R, R + dom.h / 2)
    q = R / dom.h
    offs, r2 = _offset_block(dom.m, int(math.floor(q + 0.5)) + 1)
    frac = np.clip(q - np.sqrt(r2) + 0.5, 0.0, 1.0)
    keep = frac > 0
    return offs[keep], frac[keep] * dom.cell_volume


def offset_radii(dom: LatticeDomain, offs: np.ndarray) -> np.ndarray:
    return dom.h * np.sqrt(np.sum(offs * offs, axis=1))


def cylinder_window(
    dom: LatticeDomain,
    times: Sequence[float],
    center,
    t0: float,
    R: float,
    strip: bool = False,
    backward: bool = False,
) -> tuple[SiteSet, np.ndarray]:
    """Space-time window around ``(center, t0)``.

    Parameters
    ----------
    times : sequence of float
        Snapshot times of a trajectory.
    strip : bool
        If False return the parabolic cylinder ``|t - t0| <= R^2``; if True
        return the backward strip ``t0 - 4R^2 <= t <= t0 - R^2``.
    backward : bool
        Restrict the cylinder to its past half ``t0 - R^2 <= t <= t0``.

    Returns
    -------
    sites : SiteSet
        The ball ``B_R(center)``.
    snapshot_indices : ndarray of int
        Indices into ``times`` of the snapshots inside the window.

    Raises
    ------
    EmptyRegionError
        If no snapshot lies in the time window.
    """
    t = np.asarray(times, dtype=float)
    tol = 1e-12 * max(1.0, abs(t0))
    if strip:
        sel = (t >= t0 - 4 * R * R - tol) & (t <= t0 - R * R + tol)
    else:
        sel = np.abs(t - t0) <= R * R + tol
        if backward:
            sel &= t <= t0 + tol
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise EmptyRegionError(f"no snapshot in the time window around t0={t0:.6g}, R={R:.6g}")
    return ball_sites(dom, center, R), idx
