"""Command line entry point: ``repflow run | analyze | sweep``.

Exit status: 0 on success, 2 on configuration, format or file errors, 3 when
the flow diverged (artifacts up to the divergence are kept).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import PSI_RADII, group_key, load_constants, moser_C0, probe_centers
from .config import RunConfig, load_config
from .errors import ConfigurationError, EmptyRegionError, FormatError, RepflowError
from .flow import SERIES_COLUMNS, Trajectory, elliptic_residual, run_flow, trajectory_from_snapshots
from .io import SNAPSHOT_PATTERN, read_snapshots, write_csv, write_snapshot
from .monotonicity import (
    Weighting,
    elliptic_phi_many,
    phi_monotonicity_verdict,
    psi_inequality_verdict,
    sample_of,
)
from .potentials import Family, total_energy
from .regularity import (
    HAUSDORFF_COLUMNS,
    NEAR_STATIONARY,
    SUP_E_COLUMNS,
    default_scan_centers,
    default_scan_radii,
    eps0_rule,
    epsilon_scan_elliptic,
    epsilon_scan_parabolic,
    hausdorff_sweep,
    initial_nu0,
    moser_elliptic_check,
    moser_parabolic_check,
    p0_or_zero,
    sup_e_bound_sweep,
)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_DIVERGED = 3

PHI_COLUMNS = ("center", "R", "p0", "phi_mono", "phi_eps")
PSI_COLUMNS = ("x0", "t0", "R", "R0", "psi_R", "psi_R0", "rhs", "violation", "min_C_hat", "passed")
MOSER_COLUMNS = ("kind", "x0", "t0", "R", "delta", "lhs", "rhs", "ratio", "passed")
EPS_COLUMNS = ("center", "R", "value", "triggered", "sup_delta", "sup_half_delta", "implied", "implied_half")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def write_json(path: Path, data: dict) -> Path:
    text = json.dumps(_clean(json.loads(json.dumps(data, default=_json_default))), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


# ---------------------------------------------------------------------------
# run


def cmd_run(cfg: RunConfig, out: str | Path) -> tuple[int, Trajectory]:
    """Integrate the configured flow and write snapshots, ``series.csv`` and ``run.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "resolved_config.json", cfg.resolved())
    spec = cfg.spec()
    traj = run_flow(cfg.initial_field(), spec, cfg.flow_config())
    if cfg.output.snapshots:
        for step, f in zip(traj.snapshot_steps, traj.snapshots):
            write_snapshot(f, out / SNAPSHOT_PATTERN.format(step=step))
    if cfg.output.series:
        write_csv(out / "series.csv", SERIES_COLUMNS, traj.series.as_array().tolist())
    status = "diverged" if traj.diverged else "completed"
    info = {"status": status, "steps": traj.n_steps, "t_final": float(traj.times[-1]),
            "E_initial": traj.initial.total,
            "E_final": float(traj.series["E"][-1]) if len(traj.series) else traj.initial.total,
            "snapshots": len(traj.snapshots), "residual_ratio": traj.final_residual_ratio()}
    if traj.divergence is not None:
        d = traj.divergence
        info["divergence"] = {"reason": d.reason, "step": d.step, "t": d.t, "sup_e": d.sup_e, "site": d.site}
    write_json(out / "run.json", info)
    return (EXIT_DIVERGED if traj.diverged else EXIT_OK), traj


# ---------------------------------------------------------------------------
# analyze


def _constants(cfg: RunConfig) -> dict:
    try:
        return load_constants(cfg.analysis.constants)
    except FileNotFoundError:
        raise ConfigurationError(f"constants file not found: {cfg.analysis.constants}", "analysis.constants") from None


def _eps0(cfg: RunConfig, consts: dict, kind: str) -> float:
    if cfg.analysis.eps0 != "calibrated":
        return float(cfg.analysis.eps0)
    spec = cfg.spec()
    key = group_key(cfg.domain.m, spec.L)
    table = consts.get("epsilon", {}).get(kind, {})
    if key not in table:
        raise ConfigurationError(f"no calibrated constant for {key}; give an explicit value", "analysis.eps0")
    return eps0_rule(spec, table[key])


def _radii(cfg: RunConfig, dom) -> np.ndarray:
    if cfg.analysis.radii is not None:
        return np.asarray(cfg.analysis.radii, dtype=float)
    return default_scan_radii(dom)


def _centers(cfg: RunConfig, dom, count: int) -> np.ndarray:
    if cfg.analysis.centers is not None:
        return np.asarray(cfg.analysis.centers, dtype=np.int64)
    return probe_centers(dom, count)


def load_trajectory(cfg: RunConfig, directory: str | Path) -> Trajectory:
    """Read the snapshots of a run directory as a trajectory of the configured potential."""
    steps, fields = read_snapshots(directory)
    dom = cfg.build_domain()
    if fields[0].domain != dom:
        raise FormatError(f"snapshots in {directory} do not match the configured domain", 8)
    return trajectory_from_snapshots(cfg.spec(), steps, fields)


def _psi_radii(traj: Trajectory, t0: float) -> list:
    span = t0 - float(traj.times[0])
    rmax = min(math.sqrt(max(span, 0.0)) / 2, traj.domain.R_M)
    if rmax <= 0:
        return []
    fixed = [R for R in PSI_RADII if R <= rmax]
    return fixed if len(fixed) >= 2 else [rmax * f for f in (0.25, 0.5, 0.75, 1.0)]


def cmd_analyze(cfg: RunConfig, trajectory_dir: str | Path, out: str | Path) -> dict:
    """Monotonicity and regularity reports for a stored run; returns the summary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    traj = load_trajectory(cfg, trajectory_dir)
    consts = _constants(cfg)
    spec, dom = traj.spec, traj.domain
    final = traj.snapshots[-1]
    sample = sample_of(spec, final)
    radii = _radii(cfg, dom)
    centers = _centers(cfg, dom, 6)
    rho = cfg.analysis.rho if cfg.analysis.rho is not None else dom.R_M / 2
    p0 = p0_or_zero(spec, sample, centers, rho)
    E_final = total_energy(spec, final).total
    residual = elliptic_residual(spec, final)[1]
    stationary = residual <= NEAR_STATIONARY * E_final if E_final > 0 else residual == 0
    summary: dict = {"p0": p0, "near_stationary": bool(stationary), "residual": residual, "E_final": E_final,
                     "constants": {}}

    # Phi profiles and verdicts
    rows = []
    mono = dom.m > 2
    phi_eps = np.stack([elliptic_phi_many(spec, sample, centers, R, p0, Weighting.CHAPTER_EPS) for R in radii], 1)
    if mono:
        phi_m = np.stack([elliptic_phi_many(spec, sample, centers, R, p0, Weighting.CHAPTER_MONO) for R in radii], 1)
    else:
        phi_m = np.full_like(phi_eps, np.nan)
    for a, c in enumerate(centers):
        for j, R in enumerate(radii):
            rows.append((int(c), float(R), p0, float(phi_m[a, j]), float(phi_eps[a, j])))
    write_csv(out / "phi_profile.csv", PHI_COLUMNS, rows)
    verdicts = [phi_monotonicity_verdict(spec, sample, int(c), radii, p0) for c in centers]
    summary["phi"] = {"passed": all(v.passed for v in verdicts), "max_violation": max(v.violation for v in verdicts),
                      "weighting": verdicts[0].name, "radii": radii.tolist()}

    # Psi inequality
    c_psi, C_hat = consts["psi"]["c"], consts["psi"]["C_hat"]
    summary["constants"]["psi"] = {"c": c_psi, "C_hat": C_hat}
    nu0 = initial_nu0(spec, traj, centers, rho)
    t0 = float(traj.times[-1])
    E0 = traj.initial.total
    rows = []
    pr = _psi_radii(traj, t0)
    for x0 in centers:
        for i, R in enumerate(pr):
            for R0 in pr[i + 1:]:
                try:
                    v = psi_inequality_verdict(spec, traj, (int(x0), t0), R, R0, E0, c_psi, C_hat, nu0)
                except EmptyRegionError:
                    continue
                rows.append((int(x0), t0, R, R0, v.details["psi_R"], v.details["psi_R0"], v.values[1],
                             v.violation, v.details["min_C_hat"], v.passed))
    write_csv(out / "psi_checks.csv", PSI_COLUMNS, rows)
    summary["psi"] = {"probes": len(rows), "passed": all(r[-1] for r in rows), "nu0": nu0}

    # Moser bounds
    mc = consts["moser"]
    C1, C2 = mc["C1"], mc["C2"]
    C0 = moser_C0(spec) if spec.family is not Family.SINGULAR else math.nan
    summary["constants"]["moser"] = {"C0": C0, "C1": C1, "C2": C2}
    rows = []
    if math.isfinite(C0):
        e = traj.energy_density(-1)
        for x0 in centers:
            for R in radii[:2]:
                for delta in (0.0, 0.5):
                    chk = moser_elliptic_check(e, C0, int(x0), float(R), delta, C1, C2, domain=dom)
                    rows.append(("elliptic", int(x0), t0, float(R), delta, chk.lhs, chk.rhs, chk.ratio, chk.passed))
        if len(traj.times) > 1:
            gap = float(traj.times[-1] - traj.times[-2])
            Rp = max(4 * dom.h, 1.01 * math.sqrt(gap))
            if Rp < dom.R_M and t0 - Rp * Rp >= traj.times[0]:
                for x0 in centers:
                    chk = moser_parabolic_check(traj, C0, (int(x0), t0), Rp, 0.5, C1, C2)
                    rows.append(("parabolic", int(x0), t0, Rp, 0.5, chk.lhs, chk.rhs, chk.ratio, chk.passed))
    write_csv(out / "moser_checks.csv", MOSER_COLUMNS, rows)
    summary["moser"] = {"probes": len(rows), "passed": all(r[-1] for r in rows)}

    # epsilon-regularity scans
    eps_e = _eps0(cfg, consts, "elliptic")
    ell = epsilon_scan_elliptic(spec, sample, eps_e, radii[radii / dom.h >= 2], default_scan_centers(dom),
                                cfg.analysis.delta, p0)
    write_csv(out / "epsreg_elliptic.csv", EPS_COLUMNS, list(ell.rows()))
    summary["epsreg_elliptic"] = {"eps0": eps_e, "triggered": ell.n_triggered, "empty": ell.empty,
                                  "max_implied": ell.max_implied, "max_implied_half": ell.max_implied_half,
                                  "max_fixed_sigma": ell.max_fixed_sigma}
    eps_p = _eps0(cfg, consts, "parabolic")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            par = epsilon_scan_parabolic(spec, traj, eps_p, centers=centers, delta=cfg.analysis.delta, nu0=nu0)
        write_csv(out / "epsreg_parabolic.csv", EPS_COLUMNS, list(par.rows()))
        summary["epsreg_parabolic"] = {"eps0": eps_p, "triggered": par.n_triggered, "empty": par.empty,
                                       "max_implied": par.max_implied, "max_implied_half": par.max_implied_half}
    except EmptyRegionError as exc:
        write_csv(out / "epsreg_parabolic.csv", EPS_COLUMNS, [])
        summary["epsreg_parabolic"] = {"eps0": eps_p, "skipped": str(exc)}
    write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: RunConfig, out: str | Path) -> dict:
    """Run the configured flow for every ``b`` in ``analysis.b_sweep`` and tabulate bad sets and sup bounds."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    spec0 = cfg.spec()
    if spec0.family is Family.SINGULAR:
        raise ConfigurationError("sweeps need the smoothed or higher_power family", "potential.family")
    consts = _constants(cfg)
    m, L = cfg.domain.m, spec0.L
    key = group_key(m, L)
    c = consts.get("implied", {}).get(key)
    C = consts.get("sup_e", {}).get(str(m))
    if c is None or C is None:
        raise ConfigurationError(f"no calibrated sweep constants for {key}", "analysis.constants")
    runs, failures = [], []
    for b in cfg.analysis.b_sweep:
        spec = spec0.replace(b=b)
        try:
            traj = run_flow(cfg.initial_field(), spec, cfg.flow_config())
        except RepflowError as exc:
            failures.append({"b": b, "error": str(exc)})
            continue
        if traj.diverged:
            failures.append({"b": b, "error": f"diverged: {traj.divergence.reason}"})
            continue
        runs.append((b, traj))
    hz = hausdorff_sweep(runs, c, L)
    se = sup_e_bound_sweep(runs, C)
    write_csv(out / "badset_sweep.csv", HAUSDORFF_COLUMNS, hz.rows)
    write_csv(out / "sup_e_sweep.csv", SUP_E_COLUMNS, se.rows)
    summary = {"hausdorff": hz.summary, "sup_e": se.summary, "failures": failures,
               "constants": {"c": c, "C": C}}
    write_json(out / "sweep_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="repflow", description="Matrix-field gradient flows and regularity diagnostics.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "integrate the flow"), ("analyze", "analyze a stored run"),
                       ("sweep", "sweep the regularization parameter b")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="TOML configuration file")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: output.directory)")
        if name == "analyze":
            p.add_argument("--trajectory", type=Path, default=None,
                           help="run directory with snapshots (default: output.directory)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or Path(cfg.output.directory)
        if args.command == "run":
            code, traj = cmd_run(cfg, out)
            msg = "diverged" if code == EXIT_DIVERGED else "completed"
            print(f"{msg}: {traj.n_steps} steps, {len(traj.snapshots)} snapshots in {out}")
            return code
        if args.command == "analyze":
            src = args.trajectory or Path(cfg.output.directory)
            summary = cmd_analyze(cfg, src, out)
            print(f"phi monotone: {summary['phi']['passed']}; reports in {out}")
            return EXIT_OK
        summary = cmd_sweep(cfg, out)
        print(f"bad-set band: {summary['hausdorff']['band']:.3g}; sup-e bound holds: {summary['sup_e']['passed']}")
        return EXIT_OK
    except (ConfigurationError, FormatError, FileNotFoundError, EmptyRegionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
