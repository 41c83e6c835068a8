import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pruefer import import_table, read_trajectory
from pruefer.cli import main, parse_values


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_values():
    assert parse_values("0.5,0.6") == [0.5, 0.6]
    assert parse_values("0.4:0.9:0.05") == pytest.approx(
        [0.4 + 0.05 * i for i in range(11)])
    assert parse_values("1:1:1") == [1.0]
    assert parse_values("0.1:0.3:0.1,2") == pytest.approx([0.1, 0.2, 0.3, 2])


def test_integrate_zero_deterministic(tmp_path, capsys):
    argv = ["integrate", "--potential", "zero", "--k", "1.0", "--theta0",
            "0.3", "--x-end", "100"]
    code, out, _ = run(argv + ["--out-dir", tmp_path / "a"], capsys)
    assert code == 0
    run(argv + ["--out-dir", tmp_path / "b"], capsys)
    for name in ("trajectory.csv", "trajectory.events.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()
    tr = read_trajectory(tmp_path / "a" / "trajectory.csv")
    assert np.max(np.abs(tr.theta - 0.3 - tr.x)) <= 1e-9


def test_integrate_feedback_events(tmp_path, capsys):
    code, _, _ = run(["integrate", "--potential", "feedback", "--a", "1",
                      "--k", "0.5", "--x-end", "1e3", "--out-dir", tmp_path],
                     capsys)
    assert code == 0
    kinds = {line.split(",")[0] for line in
             (tmp_path / "trajectory.events.csv").read_text().splitlines()[1:]}
    assert kinds == {"crossing", "sign_switch"}


def test_synthesize_and_replay(tmp_path, capsys):
    code, out, _ = run(["synthesize", "--a", "1", "--lambda", "0.25",
                        "--x-end", "1e3", "--out-dir", tmp_path], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["envelope_estimate"] == pytest.approx(1.0, abs=1e-3)
    assert rec["predicted_exponent"] == pytest.approx(2 / math.pi)
    table = import_table(tmp_path / "potential.csv")
    assert table.grid[-1] == pytest.approx(1e3)
    code, out, _ = run(["integrate", "--potential", "table", "--file",
                        tmp_path / "potential.csv", "--k", "0.5",
                        "--out-dir", tmp_path / "r"], capsys)
    assert code == 0
    assert json.loads(out)["x_stop"] == pytest.approx(1e3)


def test_synthesize_refuses_above_threshold(tmp_path, capsys):
    code, out, err = run(["synthesize", "--a", "1", "--lambda", "0.41",
                          "--out-dir", tmp_path], capsys)
    assert code == 2
    assert "0.405285" in err
    assert not os.listdir(tmp_path)


def test_synthesize_large_a_proceeds(tmp_path, capsys):
    code, out, _ = run(["synthesize", "--a", "2", "--lambda", "1.0",
                        "--x-end", "200", "--out-dir", tmp_path], capsys)
    assert code == 0
    assert json.loads(out)["threshold"] == pytest.approx(16 / math.pi ** 2)


def test_fit_decay(tmp_path, capsys):
    run(["integrate", "--potential", "zero", "--k", "1", "--x-end", "1e4",
         "--out-dir", tmp_path], capsys)
    code, out, _ = run(["fit-decay", tmp_path / "trajectory.csv"], capsys)
    assert code == 0
    assert abs(json.loads(out)["exponent"]) < 1e-9


@pytest.mark.parametrize("argv", [
    ["--potential", "zero", "--k", "1"],
    ["--potential", "coulomb-sign", "--a", "1", "--sign", "-1", "--k", "1",
     "--x-end", "1000"],
    ["--potential", "feedback", "--a", "1", "--k", "0.5", "--via-table"],
])
def test_verify_passes(argv, tmp_path, capsys):
    code, out, _ = run(["verify"] + argv + ["--out-dir", tmp_path], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["pass"] is True
    assert rep == json.loads(out)


def test_verify_profile_failure(tmp_path, capsys):
    code, _, _ = run(["verify", "--potential", "coulomb-sign", "--k", "1",
                      "--x-end", "1000", "--step", "0.05", "--profile",
                      "exact", "--out-dir", tmp_path], capsys)
    assert code == 1
    assert json.loads((tmp_path / "verify.json").read_text())["pass"] is False


def test_verify_feedback_needs_table(tmp_path, capsys):
    code, _, _ = run(["verify", "--potential", "feedback", "--k", "0.5",
                      "--out-dir", tmp_path], capsys)
    assert code == 2


SCAN = ["threshold-scan", "--a", "1", "--k", "0.5,0.8", "--x-end", "2e4",
        "--window", "100", "2e4"]


def test_threshold_scan_small(tmp_path, capsys):
    code, out, _ = run(SCAN + ["--out-dir", tmp_path], capsys)
    assert code == 0
    lines = [json.loads(s) for s in out.splitlines()]
    assert [r["verdict"] for r in lines[:2]] == ["embedded_eigenvalue",
                                                 "not_eigenvalue"]
    summ = lines[2]
    assert summ["summary"] == "threshold_flip"
    assert 0.5 < summ["flip_k"] < 0.8
    assert (tmp_path / "threshold_scan.jsonl").read_text() == out


def test_threshold_scan_worker_independent(tmp_path, capsys):
    _, one, _ = run(SCAN + ["--workers", "1"], capsys)
    _, two, _ = run(SCAN + ["--workers", "2"], capsys)
    assert one == two


def test_threshold_scan_zero_potential(capsys):
    code, out, _ = run(["threshold-scan", "--a", "0", "--k", "0.5,0.6",
                        "--x-end", "1e4"], capsys)
    assert code == 0
    lines = [json.loads(s) for s in out.splitlines()]
    assert all(r["verdict"] == "not_eigenvalue" for r in lines[:2])
    assert lines[2]["flip_k"] is None


def test_threshold_scan_lambda_flags(capsys):
    _, by_k, _ = run(["threshold-scan", "--a", "1", "--k", "0.5",
                      "--x-end", "1e4"], capsys)
    _, by_lam, _ = run(["threshold-scan", "--a", "1", "--lambda", "0.25",
                        "--x-end", "1e4"], capsys)
    assert by_k == by_lam


def test_sweep_records_failures_and_continues(tmp_path, capsys):
    code, out, _ = run(["sweep", "--potential", "coulomb-sign", "--a",
                        "1,1e300", "--k", "1", "--x-end", "1e4",
                        "--write-trajectories", "--out-dir", tmp_path],
                       capsys)
    assert code == 1
    recs = [json.loads(s) for s in out.splitlines()]
    assert recs[0]["verdict"] == "not_eigenvalue"
    assert recs[1]["verdict"] == "error"
    files = sorted(os.listdir(tmp_path / "trajectories"))
    assert len([f for f in files if not f.endswith(".events.csv")]) == 2
    for f in files:
        if not f.endswith(".events.csv"):
            read_trajectory(tmp_path / "trajectories" / f)


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\npotential = zero\nk = 1\nx-end = 50\n"
                   f"out_dir = {tmp_path / 'c'}\n")
    code, out, _ = run(["integrate", "--config", cfg], capsys)
    assert code == 0 and json.loads(out)["x_stop"] == 50.0
    code, out, _ = run(["integrate", "--config", cfg, "--x-end", "20"], capsys)
    assert json.loads(out)["x_stop"] == 20.0


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    code, _, err = run(["integrate", "--config", cfg], capsys)
    assert code == 2 and "nonsense" in err


@pytest.mark.parametrize("argv", [
    ["integrate", "--potential", "zero", "--k", "1", "--lambda", "1",
     "--x-end", "10"],
    ["integrate", "--potential", "zero", "--k", "1"],
    ["integrate", "--potential", "nope", "--k", "1", "--x-end", "1"],
    ["integrate", "--potential", "zero", "--k", "-1", "--x-end", "1"],
    ["threshold-scan", "--a", "-1", "--k", "0.5"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path, capsys):
    code, _, _ = run(argv + ["--out-dir", tmp_path] if argv[0] != "frobnicate"
                     else argv, capsys)
    assert code == 2


def test_numerical_failure_exit(tmp_path, capsys):
    code, _, err = run(["integrate", "--potential", "coulomb-sign", "--a",
                        "1e300", "--sign", "1", "--k", "1", "--x-end", "10",
                        "--out-dir", tmp_path], capsys)
    assert code == 1
    assert "at x=" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pruefer", "--help"],
                         capture_output=True, text=True, check=True)
    assert "threshold-scan" in out.stdout
    assert "Precedence" in out.stdout
