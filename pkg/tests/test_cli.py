import json

import pytest

from repflow.cli import EXIT_DIVERGED, EXIT_ERROR, EXIT_OK, main
from repflow.io import read_csv

CONFIG = """
[domain]
m = 2
n_per_axis = 72
period = 32.0

[matrix]
amplitude = 0.2
seed = 7
scale = "stationary"

[potential]
family = "{family}"
b = 0.1

[flow]
dt_policy = "{policy}"
dt_max = 1.0
t_end = 6.0
snapshot_stride = 1

[analysis]
b_sweep = [0.5, 0.1]

[output]
directory = "{out}"
"""


def _config(tmp_path, family="smoothed", policy="adaptive", name="c.toml"):
    p = tmp_path / name
    p.write_text(CONFIG.format(family=family, policy=policy, out=tmp_path / "run"))
    return p


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = _config(tmp)
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    return tmp, cfg


def test_run_writes_outputs(run_dir):
    tmp, _ = run_dir
    out = tmp / "run"
    info = json.loads((out / "run.json").read_text())
    assert info["status"] == "completed"
    assert info["E_final"] <= info["E_initial"]
    snaps = sorted(out.glob("snap_*.sgf"))
    assert len(snaps) == info["snapshots"]
    head, rows = read_csv(out / "series.csv")
    assert "E" in head and len(rows) == info["steps"]
    assert json.loads((out / "resolved_config.json").read_text())["domain"]["m"] == 2


def test_analyze_writes_reports(run_dir, tmp_path):
    tmp, cfg = run_dir
    out = tmp_path / "analysis"
    assert main(["analyze", "--config", str(cfg), "--trajectory", str(tmp / "run"), "--out", str(out)]) == EXIT_OK
    for name in ("phi_profile.csv", "psi_checks.csv", "moser_checks.csv", "epsreg_elliptic.csv",
                 "epsreg_parabolic.csv", "summary.json"):
        assert (out / name).is_file(), name
    summary = json.loads((out / "summary.json").read_text())
    assert "phi" in summary
    head, rows = read_csv(out / "moser_checks.csv")
    assert head[0] == "kind" and rows


def test_sweep_writes_tables(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert summary["failures"] == []
    assert len(read_csv(out / "badset_sweep.csv")[1]) == 2
    assert len(read_csv(out / "sup_e_sweep.csv")[1]) == 2


def test_sweep_rejects_singular(tmp_path, capsys):
    cfg = _config(tmp_path, family="singular")
    assert main(["sweep", "--config", str(cfg)]) == EXIT_ERROR
    assert "potential.family" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[domain]\nm = 2\nn_per_axis = 2\n[potential]\nfamily = \"smoothed\"\n")
    assert main(["run", "--config", str(p)]) == EXIT_ERROR
    assert "domain.n_per_axis" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_ERROR


def test_corrupt_snapshot_exit_code(run_dir, tmp_path, capsys):
    tmp, cfg = run_dir
    bad = tmp_path / "traj"
    bad.mkdir()
    src = sorted((tmp / "run").glob("snap_*.sgf"))[0]
    (bad / src.name).write_bytes(src.read_bytes()[:-3])
    assert main(["analyze", "--config", str(cfg), "--trajectory", str(bad), "--out", str(tmp_path / "a")]) == EXIT_ERROR
    assert "byte offset" in capsys.readouterr().err
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["analyze", "--config", str(cfg), "--trajectory", str(empty)]) == EXIT_ERROR


def test_divergence_exit_code(tmp_path):
    p = tmp_path / "div.toml"
    p.write_text(f"""
[domain]
m = 2
n_per_axis = 16
period = 4.0
[matrix]
amplitude = 0.3
[potential]
family = "singular"
[flow]
integrator = "explicit_euler"
dt_policy = "fixed"
dt = 0.5
n_steps = 400
[output]
directory = "{tmp_path / 'out'}"
""")
    assert main(["run", "--config", str(p)]) == EXIT_DIVERGED
    info = json.loads((tmp_path / "out" / "run.json").read_text())
    assert info["status"] == "diverged"
    assert info["divergence"]["reason"] == "energy overflow"


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
