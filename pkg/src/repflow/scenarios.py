"""Reference flow scenarios: perturbed winding states relaxed to near-stationarity.

A winding state ``rho * [[cos a, sin a], [sin a, -cos a]]`` with one turn
across the torus is a critical point of the energy once ``rho`` balances
the kinetic and potential terms (:func:`stationary_winding_scale`).  It is
modulationally unstable unless the period is large compared to ``b``; the
default period 32 keeps every matrix entry stable for ``b <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .fields import SymmetricMatrixField, grassmannian_winding_field
from .flow import FlowConfig, Trajectory, run_flow
from .lattice import LatticeDomain, build_domain
from .potentials import Family, PotentialSpec, make_potential


@dataclass(frozen=True)
class Scenario:
    """A perturbed winding initial state, a potential and relaxation settings.

    ``L = 1`` selects the smoothed family and ``L > 1`` the higher-power one.
    The run uses the adaptive step policy capped at ``dt_max`` and stops at
    ``t_end``; every ``stride``-th state is kept.
    """

    m: int
    b: float
    L: int = 1
    n: int = 72
    period: float = 32.0
    l: int = 2
    seed: int = 7
    amplitude: float = 0.2
    t_end: float = 40.0
    dt_max: float = 1.0
    stride: int = 1

    @property
    def label(self) -> str:
        return f"m{self.m}_b{self.b:g}_L{self.L}_n{self.n}_P{self.period:g}_s{self.seed}"

    def domain(self) -> LatticeDomain:
        return build_domain(self.m, self.n, self.period)

    def spec(self) -> PotentialSpec:
        fam = Family.SMOOTHED if self.L == 1 else Family.HIGHER_POWER
        return make_potential(fam, self.b, self.L, self.l)

    def initial(self) -> SymmetricMatrixField:
        return grassmannian_winding_field(self.domain(), self.l, 1, seed=self.seed, amplitude=self.amplitude)

    def config(self) -> FlowConfig:
        return FlowConfig(t_end=self.t_end, dt_policy="adaptive", dt_max=self.dt_max, snapshot_stride=self.stride)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


def scenario_matrix(ms=(2, 3), bs=(1.0, 0.1, 0.01), Ls=(1, 2), **kw) -> list[Scenario]:
    """Every combination of ``m``, ``b`` and ``L``; ``kw`` sets the remaining fields."""
    return [Scenario(m=m, b=b, L=L, **kw) for m in ms for b in bs for L in Ls]


def relax(scenario: Scenario, keep_fields: bool = False) -> Trajectory:
    """Run the scenario; unless ``keep_fields``, intermediate fields are released."""
    traj = run_flow(scenario.initial(), scenario.spec(), scenario.config())
    if not keep_fields:
        traj.release_fields()
    return traj


@lru_cache(maxsize=32)
def relaxed(scenario: Scenario) -> Trajectory:
    """Memoized :func:`relax` (fields released)."""
    return relax(scenario)


def winding_symbol(dom: LatticeDomain, turns: int = 1) -> float:
    """Discrete Laplacian symbol ``(2/h^2)(1 - cos(2 pi turns h / P))`` of the winding angle."""
    return 2 / dom.h**2 * (1 - math.cos(2 * math.pi * turns * dom.h / dom.period))


def stationary_winding_scale(dom: LatticeDomain, spec: PotentialSpec, turns: int = 1) -> float:
    """Scale ``rho`` making the one-axis winding state an exact lattice critical point.

    The energy per site is ``rho^2 mu + w(rho) + w(-rho)`` with ``mu`` from
    :func:`winding_symbol`; the root of its ``rho`` derivative is returned.

    Raises
    ------
    ConfigurationError
        For the free potential or when no root exists.
    """
    if spec.is_free:
        raise ConfigurationError("the free flow has no stationary winding scale")
    mu = winding_symbol(dom, turns)

    def dE(r):
        lam = np.array([r, -r])
        return 2 * r * mu + float(spec.dw(lam[:1])[0] - spec.dw(lam[1:])[0])

    hi = 1.0
    while dE(hi) < 0:
        hi *= 2
        if hi > 1e8:
            raise ConfigurationError("no stationary winding scale found")
    lo = hi / 2
    while dE(lo) > 0:
        lo /= 2
        if lo < 1e-12:
            raise ConfigurationError("no stationary winding scale found")
    return brentq(dE, lo, hi, xtol=1e-15, rtol=1e-15)


def stationary_winding_field(dom: LatticeDomain, spec: PotentialSpec, turns: int = 1) -> SymmetricMatrixField:
    """Unperturbed ``l = 2`` winding state at :func:`stationary_winding_scale`."""
    if spec.l != 2:
        raise ConfigurationError("the stationary winding state is built for l = 2", "matrix.l")
    rho = stationary_winding_scale(dom, spec, turns)
    winding = (turns,) + (0,) * (dom.m - 1)
    return grassmannian_winding_field(dom, spec.l, 1, winding=winding, amplitude=0.0, scale=rho)
