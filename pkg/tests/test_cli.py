import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from blockdict.cli import main, parse_blocks, parse_values
from blockdict.core import read_matrix, read_structure


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def synth(tmp_path, capsys, *extra):
    out = tmp_path / "truth"
    code, _, _ = run(capsys, "synth", "--n", 12, "--k-atoms", 18, "--blocks", "6x3",
                     "--l", 40, "--out", out, *extra)
    assert code == 0
    return out


def test_synth_code_eval_roundtrip(tmp_path, capsys):
    # a seed on which greedy coding finds every true support of the default problem
    truth = tmp_path / "truth"
    assert run(capsys, "synth", "--seed", 1, "--l", 100, "--out", truth)[0] == 0
    assert json.loads((truth / "manifest.json").read_text())["snr_db"] == "inf"
    theta = tmp_path / "theta.csv"
    code, out, _ = run(capsys, "code", "--dict", truth / "D_star.csv", "--blocks", truth / "d_star.csv",
                       "--input", truth / "X.csv", "--k", 2, "--out", theta)
    assert code == 0 and float(out.split("=")[1]) < 1e-6
    code, out, _ = run(capsys, "eval", "--dict", truth / "D_star.csv", "--theta", theta,
                       "--input", truth / "X.csv", "--blocks", truth / "d_star.csv", "--truth", truth)
    values = dict(line.split("=") for line in out.split())
    assert code == 0 and float(values["e"]) < 1e-6
    assert float(values["b"]) == 2 and float(values["p"]) == 100


def test_learn_writes_outputs(tmp_path, capsys):
    truth = synth(tmp_path, capsys)
    out = tmp_path / "run"
    code, stdout, _ = run(capsys, "learn", "--input", truth / "X.csv", "--atoms", 18, "--iters", 3,
                          "--init-iters", 2, "--truth", truth, "--out", out)
    assert code == 0 and stdout.startswith("e=")
    D = read_matrix(out / "D.csv")
    assert D.shape == (12, 18)
    assert read_matrix(out / "theta.csv").shape == (18, 40)
    assert max(read_structure(out / "d.csv").sizes()) <= 3
    with open(out / "trace.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["iter", "e", "num_blocks", "objective_b", "blocks_recovered"]
    assert [r["iter"] for r in rows] == ["1", "2", "3"]


def test_repeated_runs_are_byte_identical(tmp_path, capsys):
    truth = synth(tmp_path, capsys)
    outs = []
    for name in ("a", "b"):
        run(capsys, "learn", "--input", truth / "X.csv", "--atoms", 18, "--iters", 2,
            "--init-iters", 2, "--seed", 4, "--out", tmp_path / name)
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert outs[0] == outs[1]


def test_binary_format(tmp_path, capsys):
    truth = synth(tmp_path, capsys, "--format", "bin")
    assert (truth / "X.bin").read_bytes()[:4] == b"BDL1"
    code, out, _ = run(capsys, "code", "--dict", truth / "D_star.bin", "--input", truth / "X.bin",
                       "--k", 6, "--format", "bin", "--out", tmp_path / "t.bin")
    assert code == 0 and read_matrix(tmp_path / "t.bin").shape == (18, 40)


def test_missing_file_exits_2(tmp_path, capsys):
    missing = tmp_path / "nothere.csv"
    code, _, err = run(capsys, "code", "--dict", missing, "--input", missing, "--k", 1)
    assert code == 2 and str(missing) in err


def test_infeasible_config_exits_3(tmp_path, capsys):
    truth = synth(tmp_path, capsys)
    code, _, err = run(capsys, "learn", "--input", truth / "X.csv", "--atoms", 18, "--k", 30, "--s", 3)
    assert code == 3 and "InfeasibleConfig" in err


def test_bad_usage_exits_3(capsys):
    assert run(capsys, "learn")[0] == 3
    assert run(capsys, "synth", "--blocks", "7x")[0] == 3
    assert run(capsys, "frobnicate")[0] == 3


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 5, "l": 7, "blocks": "6x3", "k-atoms": 18}))
    run(capsys, "synth", "--config", cfg, "--l", 9, "--out", tmp_path / "s")
    X = read_matrix(tmp_path / "s" / "X.csv")
    assert X.shape == (5, 9)          # config beats defaults, flags beat config
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "synth", "--config", cfg)[0] == 3


def test_small_experiment(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code, stdout, _ = run(capsys, "experiment", "sac_only", "--values", "inf,10", "--trials", 2,
                          "--L", 40, "--n", 12, "--blocks", "6x3", "--out", out)
    assert code == 0 and "sac" in stdout
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 2 * 2 + 4
    assert {r["status"] for r in rows} == {"ok"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "blockdict", "code", "--dict", str(tmp_path / "x"),
                           "--input", str(tmp_path / "x"), "--k", "1"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_parse_helpers():
    assert parse_blocks("20x3") == [3] * 20
    assert parse_blocks("2x2,1x3") == [2, 2, 3]
    assert parse_blocks("3,3,2") == [3, 3, 2]
    assert parse_values("inf,0,10") == [np.inf, 0, 10]
    with pytest.raises(Exception):
        parse_blocks("x3")
