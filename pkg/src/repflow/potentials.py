"""Repulsive matrix potentials, their derivatives and energy bookkeeping.

Every potential is a spectral function ``W(f) = sum_i w(lambda_i)`` with

==============  ===================================
family          ``w(lambda)``
==============  ===================================
singular        ``1 / (2 lambda^2)``
smoothed        ``1 / (2 (lambda^2 + b))``
higher_power    ``1 / (2L (lambda^(2L) + b))``
==============  ===================================

so ``grad W = U diag(w'(lambda)) U^T`` and the Hessian acts through the
Loewner matrix of divided differences of ``w'``.  ``b = inf`` switches the
potential off (``W = 0``), which is convenient for testing the pure heat
flow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import ConfigurationError, SingularPotentialError
from .fields import (
    GradientField,
    ScalarField,
    SymmetricMatrixField,
    eigh_data,
    kinetic_density,
    symmetrize,
)
from .lattice import build_domain

# Relative eigenvalue separation below which divided differences are replaced
# by the derivative at the midpoint.
_MERGE_RTOL = 1e-7


class Family(str, Enum):
    SINGULAR = "singular"
    SMOOTHED = "smoothed"
    HIGHER_POWER = "higher_power"


@dataclass(frozen=True)
class PotentialSpec:
    """Potential family with its parameters.

    Parameters
    ----------
    family : Family
    b : float
        Regularization, ``b > 0``; ``math.inf`` disables the potential.
        Ignored by the singular family.
    L : int
        Power for the higher-power family, ``L >= 1``; must be 1 otherwise.
    l : int
        Matrix size.
    """

    family: Family
    b: float = 1.0
    L: int = 1
    l: int = 2

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 1:
            raise ConfigurationError(f"L must be a positive integer, got {self.L!r}", "potential.L")
        if fam is not Family.HIGHER_POWER and self.L != 1:
            raise ConfigurationError("L is only meaningful for the higher_power family", "potential.L")
        if fam is Family.SINGULAR:
            object.__setattr__(self, "b", 0.0)
        elif not (self.b > 0) or math.isnan(self.b):
            raise ConfigurationError(f"b must be positive, got {self.b!r}", "potential.b")
        if isinstance(self.l, bool) or int(self.l) != self.l or self.l < 1:
            raise ConfigurationError(f"matrix size must be >= 1, got {self.l!r}", "matrix.l")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "b", float(self.b))

    @property
    def power(self) -> int:
        """Exponent ``L`` (1 for the singular and smoothed families)."""
        return self.L

    @property
    def is_free(self) -> bool:
        return self.family is not Family.SINGULAR and math.isinf(self.b)

    def replace(self, **kw) -> "PotentialSpec":
        d = dict(family=self.family, b=self.b, L=self.L, l=self.l)
        d.update(kw)
        return PotentialSpec(**d)

    # -- spectral maps -----------------------------------------------------

    def w(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.is_free:
            return np.zeros_like(lam)
        if self.family is Family.SINGULAR:
            _check_invertible(lam)
            return 0.5 / lam**2
        L2 = 2 * self.L
        return 1.0 / (L2 * (lam**L2 + self.b))

    def dw(self, lam: np.ndarray) -> np.ndarray:
        """``w'(lambda) = -g(lambda)``."""
        lam = np.asarray(lam, dtype=float)
        if self.is_free:
            return np.zeros_like(lam)
        if self.family is Family.SINGULAR:
            _check_invertible(lam)
            return -(lam**-3)
        L2 = 2 * self.L
        return -(lam ** (L2 - 1)) / (lam**L2 + self.b) ** 2

    def d2w(self, lam: np.ndarray) -> np.ndarray:
        """``w''(lambda) = -g'(lambda)``."""
        lam = np.asarray(lam, dtype=float)
        if self.is_free:
            return np.zeros_like(lam)
        if self.family is Family.SINGULAR:
            _check_invertible(lam)
            return 3.0 * lam**-4
        L2 = 2 * self.L
        p = lam**L2
        return -(lam ** (L2 - 2)) * ((L2 - 1) * self.b - (L2 + 1) * p) / (p + self.b) ** 3


def make_potential(family, b: float = 1.0, L: int = 1, l: int = 2) -> PotentialSpec:
    """Build a :class:`PotentialSpec`; ``family`` may be a string."""
    try:
        fam = Family(str(family).lower() if not isinstance(family, Family) else family)
    except ValueError:
        raise ConfigurationError(
            f"unknown family {family!r}; expected one of {[f.value for f in Family]}", "potential.family"
        ) from None
    return PotentialSpec(fam, b, L, l)


def _check_invertible(lam: np.ndarray) -> None:
    if np.any(lam == 0) or not np.all(np.isfinite(lam)):
        raise SingularPotentialError("singular potential evaluated at a non-invertible matrix")


# ---------------------------------------------------------------------------
# Matrix level (arrays of shape (..., l, l))


def loewner_matrix(spec: PotentialSpec, lam: np.ndarray) -> np.ndarray:
    """Divided differences of ``w'`` over eigenvalue pairs, shape ``(..., l, l)``.

    Off the diagonal ``(w'(l_i) - w'(l_j)) / (l_i - l_j)``; on the diagonal
    and for nearly equal pairs ``w''`` at the midpoint.
    """
    li = lam[..., :, None]
    lj = lam[..., None, :]
    diff = li - lj
    d1 = spec.dw(lam)
    num = d1[..., :, None] - d1[..., None, :]
    close = np.abs(diff) <= _MERGE_RTOL * (1.0 + np.maximum(np.abs(li), np.abs(lj)))
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(close, 0.0, num / np.where(close, 1.0, diff))
    mid = spec.d2w(np.broadcast_to(0.5 * (li + lj), diff.shape)[close])
    G[close] = mid
    return G


def potential_values(spec: PotentialSpec, data: np.ndarray) -> np.ndarray:
    """``W`` at every matrix of a stack."""
    lam = eigh_data(data)[0]
    return np.sum(spec.w(lam), axis=-1)


def gradient_from_eig(spec: PotentialSpec, lam: np.ndarray, U: np.ndarray) -> np.ndarray:
    return symmetrize(np.einsum("...ij,...j,...kj->...ik", U, spec.dw(lam), U))


def hessian_form(spec: PotentialSpec, data: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """``<d(grad W)_f [D], D>`` for stacks of matrices ``f`` and directions ``D``.

    ``direction`` may carry one extra leading axis (one direction per
    spatial axis); the results are summed over it.
    """
    lam, U = eigh_data(data)
    G = loewner_matrix(spec, lam)
    D = np.asarray(direction, dtype=float)
    if D.ndim == data.ndim + 1:
        Dt = np.einsum("...ai,j...ab,...bk->j...ik", U, D, U)
        return np.einsum("...ik,j...ik->...", G, Dt**2)
    Dt = np.einsum("...ai,...ab,...bk->...ik", U, D, U)
    return np.einsum("...ik,...ik->...", G, Dt**2)


# ---------------------------------------------------------------------------
# Field level


def potential_density(spec: PotentialSpec, field: SymmetricMatrixField) -> ScalarField:
    """Pointwise ``W(f)``.

    Raises
    ------
    SingularPotentialError
        For the singular family at a site with a zero eigenvalue.
    """
    _check_size(spec, field)
    return ScalarField(field.domain, potential_values(spec, field.data), "potential")


def potential_gradient(spec: PotentialSpec, field: SymmetricMatrixField) -> SymmetricMatrixField:
    """``grad W(f)``: ``-f^-3`` for the singular family, ``-g(f)`` otherwise."""
    _check_size(spec, field)
    lam, U = eigh_data(field.data)
    return SymmetricMatrixField(field.domain, gradient_from_eig(spec, lam, U), field.t)


def hessian_contraction(spec: PotentialSpec, field: SymmetricMatrixField, direction) -> ScalarField:
    """Pointwise ``<d grad W [df], df>`` along ``direction``.

    Parameters
    ----------
    direction : SymmetricMatrixField, GradientField or ndarray
        A single matrix direction per site, or a gradient whose per-axis
        contractions are summed.
    """
    _check_size(spec, field)
    if isinstance(direction, GradientField):
        D = direction.data
    elif isinstance(direction, SymmetricMatrixField):
        D = direction.data
    else:
        D = np.asarray(direction, dtype=float)
    return ScalarField(field.domain, hessian_form(spec, field.data, D), "hessian")


def _check_size(spec: PotentialSpec, field: SymmetricMatrixField) -> None:
    if field.l != spec.l:
        raise ConfigurationError(f"potential built for l={spec.l} but field has l={field.l}", "matrix.l")


# ---------------------------------------------------------------------------
# Hessian bounds


def _scaled_g(s: np.ndarray, L: int) -> np.ndarray:
    p = s ** (2 * L)
    return s ** (2 * L - 1) / (p + 1.0) ** 2


def _scaled_dg(s: np.ndarray, L: int) -> np.ndarray:
    p = s ** (2 * L)
    return s ** (2 * L - 2) * ((2 * L - 1) - (2 * L + 1) * p) / (p + 1.0) ** 3


def _scaled_w(s: np.ndarray, L: int) -> np.ndarray:
    return 1.0 / (2 * L * (s ** (2 * L) + 1.0))


def compute_hessian_constants(L: int, samples: int = 4001) -> tuple[float, float]:
    """Uniform and quadratic Hessian constants for ``b = 1``.

    Returns
    -------
    c_uniform : float
        ``sup_s |g'(s)|``, so that every Loewner entry obeys
        ``|G_ij| <= c_uniform * b^(-1 - 1/L)``.
    c_quad : float
        ``sup |G_ij| / (w_i + w_j)`` over eigenvalue pairs (``w_i`` alone on
        the diagonal), so that ``max |G_ij| <= c_quad * b^(-1/L) * W(f)``.

    Both follow from the substitution ``lambda = b^(1/2L) s``; the suprema
    are evaluated on a dense grid and refined with a bounded scalar search.
    """
    from scipy.optimize import minimize_scalar

    s = np.concatenate([-np.geomspace(1e-4, 1e3, samples // 2)[::-1], [0.0], np.geomspace(1e-4, 1e3, samples // 2)])
    dg = np.abs(_scaled_dg(s, L))
    i = int(np.argmax(dg))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -abs(_scaled_dg(np.array(x), L)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        c_uniform = max(float(dg[i]), -float(res.fun))
    else:
        c_uniform = float(dg[i])

    diag = dg / _scaled_w(s, L)
    si, sj = np.meshgrid(s, s, indexing="ij")
    gi, gj = _scaled_g(si, L), _scaled_g(sj, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.abs((gi - gj) / (si - sj))
    G[~np.isfinite(G)] = 0.0
    ratio = G / (_scaled_w(si, L) + _scaled_w(sj, L))
    c_quad = max(float(np.max(diag)), float(np.max(ratio)))
    # local refinement around the best off-diagonal pair
    a, b_ = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    if a != b_:
        from scipy.optimize import minimize

        def neg(v):
            x, y = v
            if abs(x - y) < 1e-9:
                return 0.0
            return -abs((_scaled_g(np.array(x), L) - _scaled_g(np.array(y), L)) / (x - y)) / (
                _scaled_w(np.array(x), L) + _scaled_w(np.array(y), L))

        res = minimize(neg, [s[a], s[b_]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        c_quad = max(c_quad, -float(res.fun))
    return c_uniform, c_quad


@lru_cache(maxsize=1)
def _stored_constants() -> dict:
    try:
        text = resources.files("repflow").joinpath("constants.json").read_text()
    except (FileNotFoundError, OSError):
        return {}
    return json.loads(text)


@lru_cache(maxsize=None)
def hessian_constants(L: int) -> tuple[float, float]:
    """Stored ``(c_uniform, c_quad)`` for power ``L``, computed when absent."""
    table = _stored_constants().get("hessian", {})
    entry = table.get(str(L))
    if entry is not None:
        return float(entry["c_uniform"]), float(entry["c_quad"])
    return compute_hessian_constants(L)


@dataclass(frozen=True)
class HessianBound:
    """Bounds ``|Hess W(f)[D, D]| <= uniform |D|^2 <= ...`` and
    ``|Hess W(f)[D, D]| <= quadratic_coeff * W(f) |D|^2``.

    ``uniform = c_uniform * b^uniform_exponent`` and
    ``quadratic_coeff = c_quad * b^quadratic_exponent``.
    """

    uniform: float
    quadratic_coeff: float
    c_uniform: float
    c_quad: float
    uniform_exponent: float
    quadratic_exponent: float


def hessian_bound(spec: PotentialSpec) -> HessianBound:
    """Uniform and energy-relative Hessian bounds for bounded families.

    Raises
    ------
    ConfigurationError
        For the singular family, which admits no uniform bound.
    """
    if spec.family is Family.SINGULAR:
        raise ConfigurationError("the singular potential has no uniform Hessian bound", "potential.family")
    L = spec.L
    eu, eq = -1.0 - 1.0 / L, -1.0 / L
    cu, cq = hessian_constants(L)
    if spec.is_free:
        return HessianBound(0.0, 0.0, cu, cq, eu, eq)
    return HessianBound(cu * spec.b**eu, cq * spec.b**eq, cu, cq, eu, eq)


# ---------------------------------------------------------------------------
# Energies


def energy_density(spec: PotentialSpec, field: SymmetricMatrixField) -> ScalarField:
    """Pointwise ``e(f) = 1/2 |df|^2 + W(f)``."""
    kin = kinetic_density(field).values
    pot = potential_density(spec, field).values
    return ScalarField(field.domain, kin + pot, "energy_density")


@dataclass(frozen=True)
class EnergyReport:
    total: float
    kinetic: float
    potential: float
    sup_e: float
    argmax_site: int
    t: float


def energy_report_from_parts(field: SymmetricMatrixField, kin: np.ndarray, pot: np.ndarray) -> EnergyReport:
    dv = field.domain.cell_volume
    K = float(np.sum(kin) * dv)
    P = float(np.sum(pot) * dv)
    e = kin + pot
    i = int(np.argmax(e))
    return EnergyReport(K + P, K, P, float(e.flat[i]), i, field.t)


def total_energy(spec: PotentialSpec, field: SymmetricMatrixField) -> EnergyReport:
    """Integrated kinetic and potential energy and the largest density."""
    kin = kinetic_density(field).values
    pot = potential_density(spec, field).values
    return energy_report_from_parts(field, kin, pot)


def scaling_check(spec: PotentialSpec, field: SymmetricMatrixField, lam2: int) -> tuple[float, float]:
    """Compare the energy of ``f~(y) = f(lam^2 y) / lam`` with ``lam^-(2m-2) E(f)``.

    ``f~`` lives on the torus of period ``P / lam^2`` and is sampled at every
    ``lam^2``-th site, so both lattices share the spacing ``h``.  The smoothed
    family is not scale invariant; ``W_b(f / lam) = lam^2 W_{lam^2 b}(f)``, so
    the right-hand side uses ``b -> lam^2 b``.

    Returns
    -------
    lhs, rhs : float

    Raises
    ------
    ConfigurationError
        If ``lam2`` is not a positive integer dividing ``n``, or for the
        higher-power family, whose energy has no scaling law.
    """
    if isinstance(lam2, bool) or int(lam2) != lam2 or lam2 < 1:
        raise ConfigurationError(f"lam^2 must be a positive integer, got {lam2!r}")
    lam2 = int(lam2)
    dom = field.domain
    if dom.n_per_axis % lam2 or dom.n_per_axis // lam2 < 4:
        raise ConfigurationError(f"lam^2={lam2} does not divide n={dom.n_per_axis} into a valid lattice")
    if spec.family is Family.HIGHER_POWER and spec.L != 1 and not spec.is_free:
        raise ConfigurationError("the higher-power energy has no scaling law", "potential.family")
    lam = math.sqrt(lam2)
    sub = build_domain(dom.m, dom.n_per_axis // lam2, dom.period / lam2)
    sl = (slice(None, None, lam2),) * dom.m
    scaled = SymmetricMatrixField(sub, field.data[sl] / lam, field.t)
    lhs = total_energy(spec, scaled).total
    rhs_spec = spec if spec.family is Family.SINGULAR or spec.is_free else spec.replace(b=spec.b * lam2)
    rhs = lam ** -(2 * dom.m - 2) * total_energy(rhs_spec, field).total
    return lhs, rhs
