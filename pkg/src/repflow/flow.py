"""Time integration of the lattice gradient flow ``f_t = -(d*df + grad W(f))``.

Two integrators are provided:

* ``EXPLICIT_EULER``: forward Euler on both terms.
* ``SPECTRAL_IMEX``: the potential force is applied explicitly and the
  result is propagated by the exact discrete heat semigroup, computed per
  Fourier mode with the symbol
  ``mu_k = sum_j (2 / h^2) (1 - cos(2 pi k_j / n))``.

The number of FFT worker threads is read from ``REPFLOW_NUM_THREADS``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ConfigurationError, DivergenceError, EmptyRegionError, ShapeError, SingularPotentialError
from .fields import (
    ScalarField,
    SymmetricMatrixField,
    eigh_data,
    kinetic_density,
    rough_laplacian,
    tri_indices,
    unpack,
)
from .lattice import LatticeDomain
from .potentials import (
    EnergyReport,
    Family,
    PotentialSpec,
    energy_report_from_parts,
    gradient_from_eig,
    hessian_bound,
    loewner_matrix,
    total_energy,
)


class Integrator(str, Enum):
    EXPLICIT_EULER = "explicit_euler"
    SPECTRAL_IMEX = "spectral_imex"


def fft_workers() -> int:
    raw = os.environ.get("REPFLOW_NUM_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@lru_cache(maxsize=16)
def heat_symbol(dom: LatticeDomain) -> np.ndarray:
    """Eigenvalues of the compact Laplacian on the ``rfftn`` frequency grid."""
    n, h = dom.n_per_axis, dom.h
    full = (2.0 / h**2) * (1.0 - np.cos(2 * np.pi * np.fft.fftfreq(n)))
    half = (2.0 / h**2) * (1.0 - np.cos(2 * np.pi * np.fft.rfftfreq(n)))
    mu = np.zeros([n] * (dom.m - 1) + [n // 2 + 1])
    for j in range(dom.m):
        axis = half if j == dom.m - 1 else full
        shape = [1] * dom.m
        shape[j] = axis.size
        mu = mu + axis.reshape(shape)
    mu.setflags(write=False)
    return mu


def heat_propagate(dom: LatticeDomain, packed: np.ndarray, dt: float) -> np.ndarray:
    """Apply ``exp(-dt d*d)`` to every component of ``packed`` (grid + (c,))."""
    axes = tuple(range(dom.m))
    w = fft_workers()
    F = scipy.fft.rfftn(packed, axes=axes, workers=w)
    F *= np.exp(-dt * heat_symbol(dom))[..., None]
    return scipy.fft.irfftn(F, s=dom.shape, axes=axes, workers=w)


# ---------------------------------------------------------------------------
# Single steps


@dataclass
class _State:
    """A field together with the spectral data reused within one step."""

    field: SymmetricMatrixField
    lam: np.ndarray
    U: np.ndarray
    kin: np.ndarray
    pot: np.ndarray
    grad_w: np.ndarray

    @classmethod
    def of(cls, spec: PotentialSpec, field: SymmetricMatrixField) -> "_State":
        lam, U = eigh_data(field.data)
        pot = np.sum(spec.w(lam), axis=-1)
        grad_w = gradient_from_eig(spec, lam, U)
        return cls(field, lam, U, kinetic_density(field).values, pot, grad_w)

    @property
    def density(self) -> np.ndarray:
        return self.kin + self.pot

    def report(self) -> EnergyReport:
        return energy_report_from_parts(self.field, self.kin, self.pot)

    def residual(self) -> np.ndarray:
        return rough_laplacian(self.field).data + self.grad_w


def _advance(state: _State, dt: float, integrator: Integrator) -> SymmetricMatrixField:
    f = state.field
    dom = f.domain
    i, j = tri_indices(f.l)
    if integrator is Integrator.EXPLICIT_EULER:
        new = f.data - dt * (rough_laplacian(f).data + state.grad_w)
        packed = new[..., i, j]
    else:
        packed = heat_propagate(dom, f.data[..., i, j] - dt * state.grad_w[..., i, j], dt)
    data = unpack(packed, f.l)
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite state")
    return SymmetricMatrixField(dom, data, f.t + dt)


def step(field: SymmetricMatrixField, spec: PotentialSpec, dt: float,
         integrator: Integrator | str = Integrator.SPECTRAL_IMEX) -> SymmetricMatrixField:
    """Advance ``field`` by one step of size ``dt``.

    Raises
    ------
    DivergenceError
        If the new state is not finite or the singular potential cannot
        be evaluated.
    """
    integrator = Integrator(integrator)
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigurationError(f"time step must be positive and finite, got {dt!r}", "flow.dt")
    try:
        return _advance(_State.of(spec, field), dt, integrator)
    except (FloatingPointError, SingularPotentialError) as exc:
        raise DivergenceError(str(exc), 0, field.t, float("nan"), -1, np.empty(0)) from exc


def elliptic_residual(spec: PotentialSpec, field: SymmetricMatrixField) -> tuple[ScalarField, float]:
    """Pointwise Frobenius norm of ``d*df + grad W(f)`` and its lattice L2 norm."""
    r = _State.of(spec, field).residual()
    pointwise = np.sqrt(np.einsum("...ab,...ab->...", r, r))
    norm = math.sqrt(float(np.sum(pointwise**2)) * field.domain.cell_volume)
    return ScalarField(field.domain, pointwise, "residual"), norm


def stable_dt(spec: PotentialSpec, field: SymmetricMatrixField,
              integrator: Integrator | str = Integrator.SPECTRAL_IMEX, safety: float = 0.9) -> float:
    """Step size from the uniform Hessian bound (and the diffusion limit for Euler).

    ``safety * min(h^2 / 2m, 1 / uniform)`` for explicit Euler and
    ``safety / uniform`` for the spectral scheme.  Returns ``inf`` when no
    constraint applies.

    Raises
    ------
    ConfigurationError
        For the singular family, which has no uniform bound; use the
        adaptive policy instead.
    """
    integrator = Integrator(integrator)
    bound = hessian_bound(spec).uniform
    limit = math.inf if bound == 0 else 1.0 / bound
    if integrator is Integrator.EXPLICIT_EULER:
        dom = field.domain
        limit = min(limit, dom.h**2 / (2 * dom.m))
    return safety * limit


def local_stiffness(spec: PotentialSpec, lam: np.ndarray) -> float:
    """Largest ``|G_ij|`` of the Loewner matrix of ``w'`` over the lattice."""
    if spec.is_free:
        return 0.0
    G = loewner_matrix(spec, lam)
    return float(np.max(np.abs(G)))


def adaptive_dt(spec: PotentialSpec, state_or_field, integrator: Integrator | str = Integrator.SPECTRAL_IMEX,
                safety: float = 0.9) -> float:
    """Step size from the Hessian of ``W`` at the current state.

    Uses ``safety / max_x max_ij |G_ij(x)|``, capped by the diffusion limit
    for explicit Euler.  Works for the singular family as well.
    """
    integrator = Integrator(integrator)
    if isinstance(state_or_field, _State):
        lam = state_or_field.lam
        dom = state_or_field.field.domain
    else:
        lam = eigh_data(state_or_field.data)[0]
        dom = state_or_field.domain
    k = local_stiffness(spec, lam)
    dt = math.inf if k == 0 else safety / k
    if integrator is Integrator.EXPLICIT_EULER:
        dt = min(dt, safety * dom.h**2 / (2 * dom.m))
    return dt


# ---------------------------------------------------------------------------
# Trajectories


@dataclass
class FlowConfig:
    """Run parameters for :func:`run_flow`.

    Parameters
    ----------
    t_end : float, optional
        Final time.  At least one of ``t_end`` and ``n_steps`` is required.
    n_steps : int, optional
        Maximum number of steps.
    dt : float, optional
        Step size for ``dt_policy="fixed"``.
    dt_policy : {"fixed", "stable", "adaptive"}
        ``fixed`` uses ``dt``; ``stable`` uses :func:`stable_dt` once;
        ``adaptive`` re-evaluates :func:`adaptive_dt` every step.
    dt_max : float
        Upper cap on adaptive and stable steps.
    stop_residual : float, optional
        Stop once the residual L2 norm is at most ``stop_residual * E``.
    snapshot_stride : int
        Keep every ``snapshot_stride``-th state (plus the first and last).
    """

    t_end: float | None = None
    n_steps: int | None = None
    dt: float | None = None
    dt_policy: str = "stable"
    safety: float = 0.9
    dt_max: float = math.inf
    integrator: Integrator = Integrator.SPECTRAL_IMEX
    snapshot_stride: int = 10
    stop_residual: float | None = None

    def __post_init__(self):
        self.integrator = Integrator(self.integrator)
        if self.dt_policy not in ("fixed", "stable", "adaptive"):
            raise ConfigurationError(f"unknown dt policy {self.dt_policy!r}", "flow.dt_policy")
        if self.dt_policy == "fixed" and not (self.dt and self.dt > 0):
            raise ConfigurationError("a fixed policy needs a positive dt", "flow.dt")
        if self.t_end is None and self.n_steps is None:
            raise ConfigurationError("either t_end or n_steps must be given", "flow.t_end")
        if self.snapshot_stride < 1:
            raise ConfigurationError("snapshot stride must be >= 1", "flow.snapshot_stride")
        if not 0 < self.safety <= 1:
            raise ConfigurationError("safety factor must lie in (0, 1]", "flow.safety")


SERIES_COLUMNS = ("step", "t", "dt", "E", "kinetic", "potential", "sup_e", "residual", "dEdt", "dissipation")


@dataclass
class FlowSeries:
    """Per-step diagnostics; row ``k`` describes the step from ``k`` to ``k+1``.

    ``E``, ``kinetic``, ``potential``, ``sup_e`` and ``residual`` refer to
    the state after the step.  ``dEdt = (E_{k+1} - E_k) / dt`` and
    ``dissipation = sum_x |(f_{k+1} - f_k) / dt|^2 h^m``.
    """

    columns: dict = dc_field(default_factory=lambda: {c: [] for c in SERIES_COLUMNS})

    def append(self, **row):
        for c in SERIES_COLUMNS:
            self.columns[c].append(row[c])

    def __len__(self) -> int:
        return len(self.columns["step"])

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self[c] for c in SERIES_COLUMNS]) if len(self) else np.empty((0, len(SERIES_COLUMNS)))


@dataclass
class Trajectory:
    """Result of :func:`run_flow`.

    Attributes
    ----------
    snapshots : list of SymmetricMatrixField
        Stored states in time order; ``snapshot_steps`` gives their step numbers.
    series : FlowSeries
    initial : EnergyReport
    initial_residual : float
    divergence : DivergenceError or None
        Set when the run stopped on divergence.
    """

    spec: PotentialSpec
    domain: LatticeDomain
    config: FlowConfig
    snapshots: list
    snapshot_steps: list
    series: FlowSeries
    initial: EnergyReport
    initial_residual: float
    divergence: DivergenceError | None = None
    _density_cache: dict = dc_field(default_factory=dict, repr=False)
    _times: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        if self._times is not None:
            return self._times
        return np.array([s.t for s in self.snapshots])

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshots)

    def release_fields(self) -> None:
        """Cache every energy density, then drop all snapshot fields except the first and last.

        Dropped entries become None; :attr:`times` and
        :meth:`energy_density` keep working.
        """
        self._times = self.times.copy()
        for i in range(len(self.snapshots)):
            self.energy_density(i)
        for i in range(1, len(self.snapshots) - 1):
            self.snapshots[i] = None

    @property
    def final(self) -> SymmetricMatrixField:
        return self.snapshots[-1]

    @property
    def n_steps(self) -> int:
        return len(self.series)

    @property
    def diverged(self) -> bool:
        return self.divergence is not None

    def energy_density(self, i: int) -> np.ndarray:
        """Energy density of snapshot ``i`` (cached)."""
        if i < 0:
            i += len(self.snapshots)
        if i not in self._density_cache:
            from .potentials import energy_density

            if self.snapshots[i] is None:
                raise EmptyRegionError(f"snapshot {i} was released")
            self._density_cache[i] = energy_density(self.spec, self.snapshots[i]).values
        return self._density_cache[i]

    def final_residual_ratio(self) -> float:
        """Final residual norm divided by the final energy."""
        if len(self.series):
            E = self.series["E"][-1]
            r = self.series["residual"][-1]
        elif len(self.snapshots) > 1 and self.snapshots[-1] is not None:
            E = total_energy(self.spec, self.snapshots[-1]).total
            r = elliptic_residual(self.spec, self.snapshots[-1])[1]
        else:
            E, r = self.initial.total, self.initial_residual
        return r / E if E else (0.0 if r == 0 else math.inf)


def trajectory_from_snapshots(spec: PotentialSpec, steps, fields, config: FlowConfig | None = None) -> Trajectory:
    """Wrap stored snapshots (e.g. read from disk) as a :class:`Trajectory` with an empty series."""
    if not fields:
        raise ConfigurationError("at least one snapshot is required")
    f0 = fields[0]
    config = config or FlowConfig(n_steps=max(int(steps[-1]), 0))
    return Trajectory(spec, f0.domain, config, list(fields), list(steps), FlowSeries(),
                      total_energy(spec, f0), elliptic_residual(spec, f0)[1])


def _signature(lam: np.ndarray) -> np.ndarray:
    return np.sum(lam > 0, axis=-1)


def run_flow(initial: SymmetricMatrixField, spec: PotentialSpec, config: FlowConfig,
             raise_on_divergence: bool = False) -> Trajectory:
    """Integrate the gradient flow from ``initial``.

    Divergence (a non-finite state, or for the singular family an
    eigenvalue crossing zero) ends the run; the trajectory up to that point
    is returned with ``divergence`` set, unless ``raise_on_divergence``.
    """
    integrator = config.integrator
    if spec.family is Family.SINGULAR and config.dt_policy == "stable":
        raise ConfigurationError("the singular family needs a fixed or adaptive dt policy", "flow.dt_policy")
    state = _State.of(spec, initial)
    rep0 = state.report()
    res0 = _l2(state.residual(), initial.domain)
    if config.dt_policy == "stable":
        base_dt = min(stable_dt(spec, initial, integrator, config.safety), config.dt_max)
    elif config.dt_policy == "fixed":
        base_dt = float(config.dt)
    else:
        base_dt = None
    if base_dt is not None and not math.isfinite(base_dt):
        raise ConfigurationError("no finite stable step exists; give dt or dt_max", "flow.dt")
    traj = Trajectory(spec, initial.domain, config, [initial], [0], FlowSeries(), rep0, res0)
    t_end = math.inf if config.t_end is None else float(config.t_end)
    max_steps = config.n_steps if config.n_steps is not None else 10**9
    sig = _signature(state.lam)
    min_trace = [float(np.min(np.abs(state.lam)))]
    E_prev = rep0.total
    k = 0
    dom = initial.domain
    tol_t = 1e-12 * max(1.0, abs(t_end)) if math.isfinite(t_end) else 0.0
    while k < max_steps and state.field.t < t_end - tol_t:
        if base_dt is None:
            dt = min(adaptive_dt(spec, state, integrator, config.safety), config.dt_max)
            if not math.isfinite(dt):
                raise ConfigurationError("adaptive step is unbounded; set flow.dt_max", "flow.dt_max")
        else:
            dt = base_dt
        if math.isfinite(t_end) and state.field.t + dt > t_end - tol_t:
            dt = t_end - state.field.t
        try:
            new_field = _advance(state, dt, integrator)
            new_state = _State.of(spec, new_field)
            reason = None
            if not np.all(np.isfinite(new_state.pot)):
                reason = "non-finite potential"
            elif spec.family is Family.SINGULAR and np.any(_signature(new_state.lam) != sig):
                reason = "eigenvalue crossed zero"
            else:
                with np.errstate(over="ignore", invalid="ignore"):
                    rep = new_state.report()
                    res = _l2(new_state.residual(), dom)
                if not (math.isfinite(rep.total) and math.isfinite(res)):
                    reason = "energy overflow"
        except (FloatingPointError, SingularPotentialError, ShapeError) as exc:
            reason, new_state = str(exc), None
        if reason is not None:
            site = _failure_site(state, new_state, sig)
            err = DivergenceError(reason, k, state.field.t, float(np.max(state.density)), site,
                                  np.asarray(min_trace))
            traj.divergence = err
            if traj.snapshot_steps[-1] != k:
                traj.snapshots.append(state.field)
                traj.snapshot_steps.append(k)
            if raise_on_divergence:
                raise err
            return traj
        diff = (new_state.field.data - state.field.data) / dt
        D = float(np.sum(diff * diff) * dom.cell_volume)
        k += 1
        traj.series.append(step=k, t=new_state.field.t, dt=dt, E=rep.total, kinetic=rep.kinetic,
                           potential=rep.potential, sup_e=rep.sup_e, residual=res,
                           dEdt=(rep.total - E_prev) / dt, dissipation=D)
        min_trace.append(float(np.min(np.abs(new_state.lam))))
        E_prev = rep.total
        state = new_state
        done = (config.stop_residual is not None and res <= config.stop_residual * rep.total)
        if k % config.snapshot_stride == 0 or done:
            traj.snapshots.append(state.field)
            traj.snapshot_steps.append(k)
        if done:
            break
    if traj.snapshot_steps[-1] != k:
        traj.snapshots.append(state.field)
        traj.snapshot_steps.append(k)
    return traj


def _failure_site(state: _State, new_state: _State | None, sig: np.ndarray) -> int:
    if new_state is None:
        bad = ~np.isfinite(state.grad_w).all(axis=(-1, -2))
        return int(np.argmax(bad)) if bad.any() else int(np.argmin(np.min(np.abs(state.lam), axis=-1)))
    changed = _signature(new_state.lam) != sig
    if changed.any():
        return int(np.flatnonzero(changed.ravel())[0])
    bad = ~np.isfinite(new_state.pot).ravel()
    if bad.any():
        return int(np.argmax(bad))
    return int(np.argmax(np.max(np.abs(new_state.lam), axis=-1).ravel()))


def _l2(r: np.ndarray, dom: LatticeDomain) -> float:
    return math.sqrt(float(np.sum(r * r)) * dom.cell_volume)


@dataclass(frozen=True)
class DissipationReport:
    """Step-wise check of ``dE/dt = -|f_t|^2``.

    ``mismatch[k] = |dEdt_k + D_k| / max(D_k, floor_k)`` with
    ``floor_k = floor_rel * |E_0| / dt_k``, which keeps steps whose energy
    change is at round-off level from dominating.
    """

    mismatch: np.ndarray
    worst: float
    worst_step: int
    max_increase: float
    nonincreasing: bool


def dissipation_report(traj: Trajectory, floor_rel: float = 1e-10, slack_rel: float = 1e-10) -> DissipationReport:
    """Compare the realized energy decrease with the discrete dissipation.

    ``nonincreasing`` holds when no step raises ``E`` by more than
    ``slack_rel * |E_0|``.
    """
    s = traj.series
    if len(s) == 0:
        return DissipationReport(np.empty(0), 0.0, -1, 0.0, True)
    dEdt, D, dt = s["dEdt"], s["dissipation"], s["dt"]
    E0 = abs(traj.initial.total)
    floor = np.maximum(floor_rel * E0 / dt, np.finfo(float).tiny)
    mismatch = np.abs(dEdt + D) / np.maximum(D, floor)
    inc = dEdt * dt
    k = int(np.argmax(mismatch))
    return DissipationReport(mismatch, float(mismatch[k]), k, float(np.max(inc)), bool(np.all(inc <= slack_rel * E0)))
