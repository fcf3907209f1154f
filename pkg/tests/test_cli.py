import json
import subprocess
import sys

import pandas as pd
import pytest

from mipnn.cli import main
from mipnn.network import load


def run(capsys, *argv):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse errors
        code = exc.code
    return code, capsys.readouterr()


def test_train_sat_margin(tmp_path, capsys):
    out = tmp_path / "run"
    code, io = run(capsys, "train", "--objective", "sat-margin", "--p", 1, "--n", 20, "--seed", 1, "--out", out,
                   "--time-limit", 60)
    assert code == 0, io.err
    record = json.loads((out / "run.json").read_text())
    assert record["train_acc"] >= 0.9
    assert load(out / "network.json").p_bound == 1

    code, io = run(capsys, "eval", "--network", out / "network.json", "--split", "test")
    assert code == 0
    assert json.loads(io.out)["accuracy"] == pytest.approx(record["test_acc"])


def test_train_gd_writes_history(tmp_path, capsys):
    code, _ = run(capsys, "train", "--objective", "gd", "--n", 10, "--epochs", 5, "--out", tmp_path)
    assert code == 0
    assert len((tmp_path / "history.csv").read_text().splitlines()) == 7


def test_config_errors_exit_1(tmp_path, capsys):
    assert run(capsys, "train", "--p", 0, "--out", tmp_path)[0] == 1
    assert run(capsys, "train", "--objective", "nope")[0] == 1
    bad = tmp_path / "c.json"
    bad.write_text('{"colour": 1}')
    assert run(capsys, "train", "--config", bad, "--out", tmp_path)[0] == 1
    assert run(capsys, "train", "--config", tmp_path / "none.json")[0] == 1


def test_missing_data_exits_4(tmp_path, capsys):
    code, io = run(capsys, "train", "--data", tmp_path / "absent", "--out", tmp_path / "o")
    assert code == 4 and "not found" in io.err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"models": ["gd"], "sample_counts": [10], "epochs": 50, "seeds": [3]}))
    code, _ = run(capsys, "train", "--config", cfg, "--epochs", 4, "--out", tmp_path / "o")
    assert code == 0
    record = json.loads((tmp_path / "o" / "run.json").read_text())
    assert record["model"] == "gd" and record["seed"] == 3 and record["config"]["epochs"] == 4


def test_export_mps_counts(tmp_path, capsys):
    path = tmp_path / "m.mps"
    code, io = run(capsys, "export-mps", "--objective", "max-correct", "--n", 5, "--out", path)
    assert code == 0 and "MISMATCH" not in io.out
    assert path.read_text().endswith("ENDATA\n")


def test_prep_data_synthetic(tmp_path, capsys):
    code, io = run(capsys, "prep-data", "--synthetic", "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "train").exists() and (tmp_path / "test").exists()
    code, io = run(capsys, "train", "--data", tmp_path, "--objective", "gd", "--n", 10, "--epochs", 2,
                   "--out", tmp_path / "o")
    assert code == 0


def test_prep_data_needs_inputs(tmp_path, capsys):
    assert run(capsys, "prep-data", "--out", tmp_path)[0] == 1


def test_exp1_grid(tmp_path, capsys):
    out = tmp_path / "e1"
    code, io = run(capsys, "exp1", "--n", "10,20", "--seeds", "1,2,3", "--time-limit", 30, "--epochs", 50, "--out", out)
    assert code == 0, io.err
    frame = pd.read_csv(out / "results.csv")
    assert len(frame) == 24
    assert sorted(frame["model"].unique()) == ["gd", "max-correct", "min-hinge", "sat-margin"]
    summary = pd.read_csv(out / "summary.csv")
    assert len(summary) == 8 and set(summary["runs"]) == {3}
    mip = frame[frame["model"] != "gd"]
    assert ((mip["train_acc"] >= 0.9) | (mip["status"] != "optimal")).all()


def test_exp2_pairs_subsamples(tmp_path, capsys):
    out = tmp_path / "e2"
    code, _ = run(capsys, "exp2", "--p", "1,3", "--n", 10, "--seeds", "1,2", "--time-limit", 30, "--out", out)
    assert code == 0
    frame = pd.read_csv(out / "results.csv")
    assert len(frame) == 4
    runs = [json.loads(line) for line in (out / "runs.jsonl").read_text().splitlines()]
    hashes = {}
    for r in runs:
        hashes.setdefault(r["seed"], set()).add(r["subset_hash"])
    assert all(len(h) == 1 for h in hashes.values()) and len(hashes) == 2


def test_verify_passes(capsys):
    code, io = run(capsys, "verify", "--datasets", 2, "--form", "indicator")
    assert code == 0 and "all checks passed" in io.out


def test_verify_fault_injection(tmp_path, capsys):
    path = tmp_path / "ce.json"
    code, io = run(capsys, "verify", "--datasets", 2, "--bigm-scale", 0.1, "--form", "linearized",
                   "--counterexample", path)
    assert code == 1 and "FAIL" in io.out
    doc = json.loads(path.read_text())
    assert doc["bigm_scale"] == 0.1 and doc["form"] == "linearized"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mipnn.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("mipnn")
