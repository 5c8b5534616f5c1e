"""One-time calibration of the unnamed constants and the probe sets that use them.

Every regularity statement asserts the existence of constants that are
uniform over solutions.  :func:`calibrate` evaluates the probes below on a
calibration scenario set (its own seed and amplitude), takes the smallest
constant each probe needs and multiplies the maximum by a safety factor.
The result lives in the package file ``constants.json``; the acceptance
suite then checks the same probes on different scenarios against it.

Run ``python3 -m repflow.calibration`` to regenerate the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .lattice import LatticeDomain
from .monotonicity import psi_inequality_verdict
from .potentials import PotentialSpec, compute_hessian_constants, hessian_bound
from .regularity import (
    default_scan_centers,
    epsilon_scan_elliptic,
    epsilon_scan_parabolic,
    initial_nu0,
    minimal_C1,
    moser_elliptic_check,
    moser_parabolic_check,
    sup_e_bound_sweep,
)
from .scenarios import Scenario, relaxed, scenario_matrix

CALIBRATION_SEED = 101
CALIBRATION_AMPLITUDE = 0.3
SAFETY = 2.0
MOSER_C2 = 16.0
C0_FACTOR = 2.0
SWEEP_BS = (1.0, 0.3, 0.1, 0.03)


def constants_path() -> Path:
    return Path(str(resources.files("repflow").joinpath("constants.json")))


def load_constants(path: str | Path | None = None) -> dict:
    """Read the constants file (the packaged one by default)."""
    p = constants_path() if path is None else Path(path)
    return json.loads(p.read_text())


def group_key(m: int, L: int) -> str:
    return f"m{m}_L{L}"


def moser_C0(spec: PotentialSpec) -> float:
    """Zeroth-order coefficient of the subsolution inequality, ``C0_FACTOR`` times the uniform Hessian bound."""
    return C0_FACTOR * hessian_bound(spec).uniform


# ---------------------------------------------------------------------------
# Probe sets


def probe_centers(dom: LatticeDomain, count: int = 6) -> np.ndarray:
    """A deterministic spread of ``count`` centers from the default scan grid."""
    grid = default_scan_centers(dom, 64)
    pick = np.linspace(0, grid.size - 1, count).round().astype(int)
    return grid[pick]


def moser_probes(traj, C1: float, C2: float = MOSER_C2) -> list:
    """Elliptic checks on the final state and parabolic checks at the last two probe times."""
    dom, spec = traj.domain, traj.spec
    C0 = moser_C0(spec)
    e = traj.energy_density(-1)
    out = []
    for x0 in probe_centers(dom):
        for R in (4 * dom.h, 8 * dom.h):
            for delta in (0.0, 0.5):
                out.append(moser_elliptic_check(e, C0, int(x0), R, delta, C1, C2, domain=dom))
    times = traj.times
    for t0 in (float(times[-1]), float(times[len(times) // 2])):
        for x0 in probe_centers(dom, 3):
            for R in (4 * dom.h, 6 * dom.h):
                if t0 - R * R < times[0]:
                    continue
                out.append(moser_parabolic_check(traj, C0, (int(x0), t0), R, 0.5, C1, C2))
    return out


PSI_RADII = (1.0, 1.5, 2.0, 3.0)


def psi_probes(traj, c: float, C_hat: float) -> list:
    """``Psi`` verdicts for every center, probe time and radius pair ``R < R0``."""
    dom, spec = traj.domain, traj.spec
    nu0 = initial_nu0(spec, traj)
    E0 = traj.initial.total
    times = traj.times
    out = []
    for t0 in (float(times[-1]), float(times[-1]) - 10.0):
        for x0 in probe_centers(dom, 4):
            for i, R in enumerate(PSI_RADII):
                for R0 in PSI_RADII[i + 1:]:
                    if t0 - 4 * R0 * R0 < times[0]:
                        continue
                    out.append(psi_inequality_verdict(spec, traj, (int(x0), t0), R, R0, E0, c, C_hat, nu0))
    return out


def elliptic_scan(traj, eps0: float):
    return epsilon_scan_elliptic(traj.spec, traj.snapshots[-1], eps0)


def parabolic_scan(traj, eps0: float):
    return epsilon_scan_parabolic(traj.spec, traj, eps0, centers=probe_centers(traj.domain, 8))


# ---------------------------------------------------------------------------
# Calibration


@dataclass
class _Log:
    quiet: bool = False

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)


def calibration_scenarios(**kw) -> list[Scenario]:
    return scenario_matrix(seed=CALIBRATION_SEED, amplitude=CALIBRATION_AMPLITUDE, **kw)


def sweep_scenarios(m: int, seed: int, amplitude: float, bs=SWEEP_BS) -> list[Scenario]:
    return [Scenario(m=m, b=b, L=1, seed=seed, amplitude=amplitude) for b in bs]


def calibrate(ms=(2, 3), quiet: bool = False) -> dict:
    """Evaluate all probes on the calibration scenarios and return the constants table."""
    log = _Log(quiet)
    t_start = time.time()
    hess = {}
    for L in (1, 2, 3):
        cu, cq = compute_hessian_constants(L)
        hess[str(L)] = {"c_uniform": cu, "c_quad": cq}
    log(f"hessian constants done ({time.time() - t_start:.1f}s)")

    need_C1, need_Chat = 0.0, 0.0
    max_phi: dict = {}
    max_psi: dict = {}
    runs = {}
    for sc in calibration_scenarios(ms=ms):
        traj = relaxed(sc)
        runs[sc] = traj
        for chk in moser_probes(traj, 0.0):
            need_C1 = max(need_C1, minimal_C1(chk))
        for v in psi_probes(traj, 0.0, 0.0):
            need_Chat = max(need_Chat, v.details["min_C_hat"])
        key = group_key(sc.m, sc.L)
        bs = sc.b ** (1 / sc.L)
        ell = elliptic_scan(traj, math.inf)
        par = parabolic_scan(traj, math.inf)
        max_phi.setdefault(key, []).append(bs / (2 * float(np.max(ell.values))))
        max_psi.setdefault(key, []).append(bs / (2 * float(np.max(par.values))))
        log(f"{sc.label}: C1>={need_C1:.3g} C_hat>={need_Chat:.3g} ({time.time() - t_start:.1f}s)")

    C_ell = {k: min(v) for k, v in max_phi.items()}
    C_par = {k: min(v) for k, v in max_psi.items()}

    implied = {}
    for sc, traj in runs.items():
        if sc.b != 1.0:
            continue
        key = group_key(sc.m, sc.L)
        rep = elliptic_scan(traj, traj.spec.b ** (1 / sc.L) / (2 * C_ell[key]))
        implied[key] = rep.max_implied

    sup_C = {}
    for m in ms:
        sweep_runs = []
        for sc in sweep_scenarios(m, CALIBRATION_SEED, CALIBRATION_AMPLITUDE):
            sweep_runs.append((sc.b, runs.get(sc) or relaxed(sc)))
        sup_C[str(m)] = SAFETY * sup_e_bound_sweep(sweep_runs, math.inf).summary["min_C"]
        log(f"sup-e sweep m={m} done ({time.time() - t_start:.1f}s)")

    return {
        "hessian": hess,
        "moser": {"C1": SAFETY * need_C1 if need_C1 > 0 else 1.0, "C2": MOSER_C2, "C0_factor": C0_FACTOR,
                  "min_C1": need_C1},
        "psi": {"c": 0.0, "C_hat": SAFETY * need_Chat, "min_C_hat": need_Chat},
        "epsilon": {"elliptic": C_ell, "parabolic": C_par},
        "implied": implied,
        "sup_e": sup_C,
        "calibration": {"seed": CALIBRATION_SEED, "amplitude": CALIBRATION_AMPLITUDE, "safety": SAFETY,
                        "ms": list(ms), "sweep_bs": list(SWEEP_BS)},
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python3 -m repflow.calibration", description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=None, help="output path (default: the packaged constants.json)")
    ap.add_argument("--m", type=int, nargs="+", default=[2, 3], help="dimensions to calibrate")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    table = calibrate(tuple(args.m), args.quiet)
    out = args.out or constants_path()
    out.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
