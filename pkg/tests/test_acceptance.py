"""Acceptance suite: one or more tests per criterion, summarized at the end of the run.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest;
the terminal summary prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest
import scipy.fft

from conftest import criterion, note, smooth_field
from repflow.calibration import group_key, load_constants, moser_probes, probe_centers, psi_probes
from repflow.fields import constant_field, eigen_kinetic_identity, eigh_data, grassmannian_winding_field
from repflow.flow import FlowConfig, dissipation_report, heat_symbol, run_flow, stable_dt
from repflow.io import decode_snapshot, encode_snapshot
from repflow.lattice import build_domain, site_set
from repflow.monotonicity import (
    gaussian_recentred_lower_bound_check,
    mu_ratio,
    phi_monotonicity_verdict,
    sample_of,
)
from repflow.potentials import gradient_from_eig, hessian_form, make_potential, scaling_check
from repflow.regularity import (
    NEAR_STATIONARY,
    eps0_rule,
    epsilon_scan_elliptic,
    epsilon_scan_parabolic,
    hausdorff_sweep,
    p0_or_zero,
    sup_e_bound_sweep,
    vitali_cover,
)
from repflow.scenarios import Scenario, relaxed, scenario_matrix

CONSTANTS = load_constants()
MATRIX = scenario_matrix()
MATRIX_IDS = [sc.label for sc in MATRIX]

C1 = criterion(1, "dissipation identity and first-order mismatch")
C2 = criterion(2, "gradient and Hessian oracles")
C3 = criterion(3, "eigenbasis kinetic identity converges at second order")
C4 = criterion(4, "exact heat semigroup per Fourier mode")
C5 = criterion(5, "mu(4h, x) close to 2/m")
C6 = criterion(6, "Phi monotonicity on the scenario matrix")
C7 = criterion(7, "Psi inequality with one calibrated (c, C_hat)")
C8 = criterion(8, "Moser bounds with one calibrated (C1, C2)")
C9 = criterion(9, "epsilon-regularity implied constant uniform in b")
C10 = criterion(10, "Gaussian recentering lower bound")
C11 = criterion(11, "bad-set Hausdorff measure bounded across b")
C12 = criterion(12, "sup e_b bound with one C, m=3")
C13 = criterion(13, "energy scaling law")
C14 = criterion(14, "covering invariants and snapshot round trip")


# ---------------------------------------------------------------------------
# 1. Dissipation identity


def _dissipation_run(factor: float):
    dom = build_domain(2, 32, 8.0)
    spec = make_potential("smoothed", 0.1)
    f0 = grassmannian_winding_field(dom, amplitude=0.5, seed=1)
    dt = stable_dt(spec, f0) * factor
    cfg = FlowConfig(n_steps=round(500 / factor), dt=dt, dt_policy="fixed", snapshot_stride=10**6)
    return run_flow(f0, spec, cfg)


@C1
def test_dissipation_identity():
    t = time.perf_counter()
    traj = _dissipation_run(1.0)
    elapsed = time.perf_counter() - t
    rep = dissipation_report(traj, slack_rel=1e-10)
    note(1, f"worst mismatch {rep.worst:.3%}, {elapsed:.1f}s")
    assert traj.n_steps == 500
    assert rep.nonincreasing
    assert rep.worst <= 0.05
    assert elapsed < 30


@C1
def test_dissipation_mismatch_halves_with_dt():
    w1 = dissipation_report(_dissipation_run(1.0)).worst
    w2 = dissipation_report(_dissipation_run(0.5)).worst
    ratio = w1 / w2
    note(1, f"halving ratio {ratio:.3f}")
    assert 2 * 0.7 <= ratio <= 2 * 1.3


# ---------------------------------------------------------------------------
# 2. Gradient and Hessian oracles


def _direct_W(spec, f: np.ndarray) -> np.ndarray:
    """``W`` from matrix inverses and powers, independent of any eigendecomposition."""
    l = f.shape[-1]
    if spec.family.value == "singular":
        fi = np.linalg.inv(f)
        return 0.5 * np.einsum("...ij,...ij->...", fi, fi)
    p = np.linalg.matrix_power(f, 2 * spec.L)
    return np.trace(np.linalg.inv(p + spec.b * np.eye(l)), axis1=-2, axis2=-1) / (2 * spec.L)


def _random_pairs(rng, count: int, l: int = 3):
    Q = np.linalg.qr(rng.normal(size=(count, l, l)))[0]
    lam = rng.uniform(0.3, 3.0, (count, l)) * rng.choice([-1.0, 1.0], (count, l))
    close = rng.random(count) < 0.3
    lam[close, 1] = lam[close, 0] + 1e-6
    f = np.einsum("kij,kj,klj->kil", Q, lam, Q)
    f = 0.5 * (f + np.swapaxes(f, -1, -2))
    D = rng.normal(size=(count, l, l))
    D = D + np.swapaxes(D, -1, -2)
    step = 1e-2 * np.min(np.abs(lam), axis=1) / np.linalg.norm(D, axis=(1, 2))
    return f, D, step, close


def _fd(W, f, D, d):
    """Fourth-order central difference of ``s -> W(f + s D)`` at 0."""
    def at(s):
        return W(f + (s * d)[:, None, None] * D)
    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * d)


def _direct_second_derivative(spec, f: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Exact ``d^2/ds^2 W(f + s D)`` at 0 from matrix products and one inverse.

    With ``P(s) = (f + s D)^(2L)`` and ``A = P + b I`` (``b = 0``, ``L = 1`` for
    the singular family), ``W = tr(A^-1) / 2L`` and
    ``W'' = (2 tr(A^-1 P' A^-1 P' A^-1) - tr(A^-1 P'' A^-1)) / 2L``.
    """
    L = spec.L
    n = 2 * L
    l = f.shape[-1]
    pw = [np.broadcast_to(np.eye(l), f.shape)]
    for _ in range(n):
        pw.append(pw[-1] @ f)
    P1 = sum(pw[k] @ D @ pw[n - 1 - k] for k in range(n))
    P2 = 2 * sum(pw[i] @ D @ pw[j] @ D @ pw[n - 2 - i - j] for i in range(n - 1) for j in range(n - 1 - i))
    Ai = np.linalg.inv(pw[n] + spec.b * np.eye(l))
    t1 = np.trace(Ai @ P1 @ Ai @ P1 @ Ai, axis1=-2, axis2=-1)
    t2 = np.trace(Ai @ P2 @ Ai, axis1=-2, axis2=-1)
    return (2 * t1 - t2) / n


FAMILIES = [("singular", 1), ("smoothed", 1), ("higher_power", 2), ("higher_power", 3)]


@C2
@pytest.mark.parametrize("family,L", FAMILIES, ids=[f"{f}_L{L}" for f, L in FAMILIES])
def test_gradient_and_hessian_oracles(family, L):
    t = time.perf_counter()
    spec = make_potential(family, 0.3, L, 3)
    f, D, d, close = _random_pairs(np.random.default_rng(2024 + L), 1000)
    assert close.sum() > 200
    W = lambda x: _direct_W(spec, x)  # noqa: E731
    lam, U = eigh_data(f)
    grad = gradient_from_eig(spec, lam, U)
    g_fd = (16 * _fd(W, f, D, d / 2) - _fd(W, f, D, d)) / 15
    g_err = np.abs(np.einsum("kij,kij->k", grad, D) - g_fd) / np.abs(g_fd)
    hs = hessian_form(spec, f, D)
    h_ref = _direct_second_derivative(spec, f, D)
    h_err = np.abs(hs - h_ref) / np.abs(h_ref)
    elapsed = time.perf_counter() - t
    note(2, f"{family}_L{L}: grad {g_err.max():.1e}, hess {h_err.max():.1e}")
    assert g_err.max() <= 1e-6
    assert h_err.max() <= 1e-5
    assert h_err[close].max() <= 1e-5
    assert elapsed < 10


# ---------------------------------------------------------------------------
# 3. Eigenbasis kinetic identity


@C3
def test_kinetic_identity_second_order():
    t = time.perf_counter()
    coarse = eigen_kinetic_identity(smooth_field(32)).mismatch
    fine = eigen_kinetic_identity(smooth_field(64)).mismatch
    elapsed = time.perf_counter() - t
    note(3, f"mismatch {coarse:.3g} -> {fine:.3g}, ratio {coarse / fine:.2f}")
    assert coarse / fine >= 3.5
    assert elapsed < 20


# ---------------------------------------------------------------------------
# 4. Exact heat semigroup


@C4
def test_free_flow_is_exact_heat_semigroup():
    f = smooth_field(32, l=2)
    spec = make_potential("smoothed", math.inf, l=2)
    dt = 1e-4
    traj = run_flow(f, spec, FlowConfig(n_steps=100, dt=dt, dt_policy="fixed", snapshot_stride=1))
    decay = np.exp(-dt * heat_symbol(f.domain))[..., None]
    worst = 0.0
    for k in range(100):
        a = scipy.fft.rfftn(traj.snapshots[k].packed(), axes=(0, 1))
        b = scipy.fft.rfftn(traj.snapshots[k + 1].packed(), axes=(0, 1))
        pred = a * decay
        live = np.abs(a) > 1e-6 * np.abs(a).max()
        worst = max(worst, float(np.max(np.abs(b - pred)[live] / np.abs(pred)[live])))
    note(4, f"worst relative mode error {worst:.1e}")
    assert len(traj.snapshots) == 101
    assert worst <= 1e-12


# ---------------------------------------------------------------------------
# 5. mu limit


def _mu_errors(n: int) -> np.ndarray:
    dom = build_domain(2, n, 1.0)
    spec = make_potential("smoothed", math.inf, l=2)
    f = grassmannian_winding_field(dom, amplitude=0.3, seed=3)
    xs = np.random.default_rng(0).integers(0, dom.n_sites, 20)
    mu = np.array([mu_ratio(spec, f, int(x), 4 * dom.h) for x in xs])
    return np.abs(mu - 2 / dom.m) / (2 / dom.m)


@C5
def test_mu_limit():
    err = _mu_errors(64)
    note(5, f"max relative deviation {err.max():.3f} at n=64")
    assert err.max() <= 0.10


@C5
def test_mu_limit_improves_under_refinement():
    assert _mu_errors(128).max() < _mu_errors(64).max()


# ---------------------------------------------------------------------------
# Scenario matrix (criteria 6 to 9)


def _stationary(traj) -> bool:
    return traj.final_residual_ratio() < NEAR_STATIONARY


@C6
@pytest.mark.parametrize("sc", MATRIX, ids=MATRIX_IDS)
def test_phi_monotonicity(sc):
    traj = relaxed(sc)
    assert _stationary(traj), f"residual ratio {traj.final_residual_ratio():.2e}"
    dom, spec = traj.domain, traj.spec
    sample = sample_of(spec, traj.final)
    centers = probe_centers(dom)
    p0 = p0_or_zero(spec, sample, centers, dom.R_M / 2)
    radii = np.arange(4, 17) * dom.h
    verdicts = [phi_monotonicity_verdict(spec, sample, int(c), radii, p0, slack=1e-2) for c in centers]
    worst = max(v.violation for v in verdicts)
    assert all(v.passed for v in verdicts), f"worst violation {worst:.3g}"


@C6
@pytest.mark.parametrize("m", [2, 3])
def test_phi_flat_for_constant_field(m):
    dom = build_domain(m, 32, 16.0)
    spec = make_potential("smoothed", 0.5)
    f = constant_field(dom, np.diag([1.3, -0.7]))
    sample = sample_of(spec, f)
    p0 = p0_or_zero(spec, sample, probe_centers(dom), dom.R_M / 2)
    radii = np.arange(2, 8) * dom.h
    v = phi_monotonicity_verdict(spec, sample, 0, radii, p0)
    vals = np.array(v.values)
    assert p0 == pytest.approx(2.0)
    assert (vals.max() - vals.min()) / vals.mean() <= 0.05


@C7
@pytest.mark.parametrize("sc", MATRIX, ids=MATRIX_IDS)
def test_psi_inequality(sc):
    traj = relaxed(sc)
    c, C_hat = CONSTANTS["psi"]["c"], CONSTANTS["psi"]["C_hat"]
    verdicts = psi_probes(traj, c, C_hat)
    assert len(verdicts) >= 20
    failing = [v for v in verdicts if not v.passed]
    assert not failing, f"{len(failing)} of {len(verdicts)} probes fail"


@C8
@pytest.mark.parametrize("sc", MATRIX, ids=MATRIX_IDS)
def test_moser_bounds(sc):
    traj = relaxed(sc)
    checks = moser_probes(traj, CONSTANTS["moser"]["C1"], CONSTANTS["moser"]["C2"])
    kinds = {c.label for c in checks}
    assert kinds == {"moser_elliptic", "moser_parabolic"}
    worst = max(c.ratio for c in checks)
    assert all(c.passed for c in checks), f"worst ratio {worst:.3g}"


EPS_GROUPS = [(m, L, kind) for m in (2, 3) for L in (1, 2) for kind in ("elliptic", "parabolic")]


@C9
@pytest.mark.parametrize("m,L,kind", EPS_GROUPS, ids=[f"m{m}_L{L}_{k}" for m, L, k in EPS_GROUPS])
def test_epsilon_regularity_uniform_in_b(m, L, kind):
    C_cal = CONSTANTS["epsilon"][kind][group_key(m, L)]
    implied = []
    for b in (1.0, 0.1, 0.01):
        traj = relaxed(Scenario(m=m, b=b, L=L))
        eps0 = eps0_rule(traj.spec, C_cal)
        if kind == "elliptic":
            rep = epsilon_scan_elliptic(traj.spec, traj.final, eps0)
        else:
            rep = epsilon_scan_parabolic(traj.spec, traj, eps0, centers=probe_centers(traj.domain, 8))
        assert not rep.empty, f"no probe triggered at b={b}"
        implied.append(rep.max_implied)
    spread = max(implied) / min(implied)
    note(9, f"m{m}_L{L}_{kind} spread {spread:.1f}")
    assert spread < 3, f"implied constants {[f'{v:.3g}' for v in implied]}"


# ---------------------------------------------------------------------------
# 10. Gaussian recentering


@C10
@pytest.mark.parametrize("m", [2, 3])
def test_gaussian_recentering_bound(m):
    rng = np.random.default_rng(10 + m)
    dom = build_domain(m, 64, 16.0)
    violations = 0
    for _ in range(10_000 // 2):
        rho = rng.uniform(0.05, 1.0) * dom.R_M
        x1 = rng.uniform(0, dom.period, m)
        t1 = rng.uniform(-5, 5)
        u = rng.normal(size=m)
        u *= rho * rng.random() ** (1 / m) / np.linalg.norm(u)
        t = t1 + rng.uniform(-1, 1) * rho * rho
        lhs, rhs = gaussian_recentred_lower_bound_check(dom, (x1, t1), rho, (x1 + u, t))
        violations += lhs < rhs
    assert violations == 0


# ---------------------------------------------------------------------------
# 11. Hausdorff sweep


@C11
@pytest.mark.parametrize("L", [1, 2])
def test_hausdorff_sweep_bounded(L):
    t = time.perf_counter()
    runs = [(b, relaxed(Scenario(m=2, b=b, L=L))) for b in (1e-1, 1e-2, 1e-3)]
    c = CONSTANTS["implied"][group_key(2, L)]
    table = hausdorff_sweep(runs, c, L)
    elapsed = time.perf_counter() - t
    s = table.summary
    vac = ", vacuous: every bad set empty" if s["vacuous"] else ""
    note(11, f"L={L} band {s['band']:.2f}{vac}")
    assert all(table.column("stationary"))
    assert s["bounded"]
    assert elapsed < 300


# ---------------------------------------------------------------------------
# 12. sup e bound


@C12
def test_sup_e_bound_m3():
    runs = [(b, relaxed(Scenario(m=3, b=b, L=1))) for b in (1.0, 0.3, 0.1, 0.03)]
    table = sup_e_bound_sweep(runs, CONSTANTS["sup_e"]["3"])
    s = table.summary
    note(12, f"C={s['C']:.3g}, needed {s['min_C']:.3g}, slope {s['slope']:.2f}")
    assert s["passed"]


# ---------------------------------------------------------------------------
# 13. Scaling law


@C13
@pytest.mark.parametrize("family", ["smoothed", "singular"])
def test_scaling_law(family):
    spec = make_potential(family, 0.1)
    dev = []
    for n in (32, 64):
        f = grassmannian_winding_field(build_domain(2, n, 8.0), amplitude=0.3, seed=3)
        lhs, rhs = scaling_check(spec, f, 2)
        dev.append(abs(lhs / rhs - 1))
    note(13, f"{family}: |lhs/rhs - 1| {dev[0]:.2e} -> {dev[1]:.2e}")
    assert max(dev) <= 0.05
    assert dev[1] < dev[0]


# ---------------------------------------------------------------------------
# 14. Covering and IO invariants


@C14
def test_vitali_cover_invariants():
    rng = np.random.default_rng(14)
    doms = [build_domain(2, 32, 4.0), build_domain(3, 12, 3.0)]
    for k in range(1000):
        dom = doms[k % 2]
        mask = rng.random(dom.n_sites) < rng.uniform(0.001, 0.2)
        S = site_set(dom, mask)
        r = rng.uniform(0.5, 4.0) * dom.h
        rep = vitali_cover(dom, S, r)
        assert rep.covered
        if len(S) == 0:
            assert rep.J == 0
            continue
        P = S.coords()
        C = rep.centers.coords()
        d = np.abs(P[:, None, :] - C[None, :, :])
        d = np.minimum(d, dom.period - d)
        dist = np.sqrt(np.sum(d * d, axis=-1))
        assert np.all(dist.min(axis=1) <= 3 * r * (1 + 1e-12))
        dc = np.abs(C[:, None, :] - C[None, :, :])
        dc = np.minimum(dc, dom.period - dc)
        cc = np.sqrt(np.sum(dc * dc, axis=-1)) + np.eye(len(C)) * 1e9
        assert np.all(cc > 2 * r)


@C14
def test_snapshot_round_trip_bit_identical():
    rng = np.random.default_rng(7)
    for m, n, l in ((2, 16, 2), (3, 8, 3), (2, 12, 4)):
        f = grassmannian_winding_field(build_domain(m, n, 2.5), l, 1, seed=int(rng.integers(100)), amplitude=0.4)
        f.t = float(rng.uniform(0, 10))
        g = decode_snapshot(encode_snapshot(f))
        assert g.domain == f.domain and g.t == f.t
        assert g.data.tobytes() == f.data.tobytes()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
