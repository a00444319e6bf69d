import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dlgn import checkpoint as ckpt
from dlgn.circuit import import_netlist
from dlgn.cli import main
from dlgn.train import METRICS_HEADER

BASE = """dataset = parity:4
train_fraction = 1.0
layer_width = 16
base_layers = 2
batch_size = 8
eval_every = 10
"""


def write_cfg(tmp_path, extra="", name="run.cfg"):
    # later keys replace the base ones; duplicates are a config error
    keys = {line.split(" = ")[0] for line in extra.splitlines()}
    base = "".join(line + "\n" for line in BASE.splitlines() if line.split(" = ")[0] not in keys)
    p = tmp_path / name
    p.write_text(base + extra)
    return str(p)


def test_train_writes_artifacts(tmp_path):
    cfg = write_cfg(tmp_path, "steps = 20\nhistogram_layers = 1\n")
    out = tmp_path / "r"
    assert main(["--config", cfg, "--out", str(out), "train"]) == 0
    rows = list(csv.reader(open(out / "metrics.csv")))
    assert tuple(rows[0]) == METRICS_HEADER
    assert [r[0] for r in rows[1:]] == ["0", "10", "20"]
    assert (out / "histograms.csv").exists()
    echo = (out / "config.txt").read_text()
    assert "steps = 20" in echo and "seed = 0" in echo
    assert ckpt.load(out / "checkpoint.dlgn").step == 20


def test_flags_after_subcommand(tmp_path):
    cfg = write_cfg(tmp_path, "steps = 0\n")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--seed", "9"]) == 0
    assert "seed = 9" in (tmp_path / "r" / "config.txt").read_text()


def test_resume_matches_uninterrupted_run(tmp_path):
    full = write_cfg(tmp_path, "steps = 30\n", "full.cfg")
    half = write_cfg(tmp_path, "steps = 10\n", "half.cfg")
    assert main(["--config", full, "--out", str(tmp_path / "a"), "train"]) == 0
    assert main(["--config", half, "--out", str(tmp_path / "b"), "train"]) == 0
    assert main(["--config", full, "--out", str(tmp_path / "b"), "train",
                 "--resume", str(tmp_path / "b" / "checkpoint.dlgn")]) == 0
    a = ckpt.load(tmp_path / "a" / "checkpoint.dlgn")
    b = ckpt.load(tmp_path / "b" / "checkpoint.dlgn")
    for la, lb in zip(a.net.layers, b.net.layers):
        np.testing.assert_allclose(la.logits, lb.logits, atol=1e-10, rtol=0)
    steps = [r[0] for r in csv.reader(open(tmp_path / "b" / "metrics.csv"))][1:]
    assert steps == ["0", "10", "20", "30"]


def test_export_eval_and_diagnose(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "steps = 200\nlayer_width = 64\nlearning_rate = 0.02\n")
    out = str(tmp_path / "r")
    assert main(["--config", cfg, "--out", out, "train"]) == 0
    ck = f"{out}/checkpoint.dlgn"
    assert main(["--config", cfg, "--out", out, "discretize", "--checkpoint", ck]) == 0
    raw = import_netlist((tmp_path / "r" / "circuit.netlist").read_text())
    assert main(["--config", cfg, "--out", out, "export", "--checkpoint", ck]) == 0
    simp = import_netlist((tmp_path / "r" / "circuit.netlist").read_text())
    assert simp.n_nodes <= raw.n_nodes == 128
    report = json.loads((tmp_path / "r" / "circuit_report.json").read_text())
    assert report["nodes_before"] == 128 and report["simplified"] is True
    capsys.readouterr()
    assert main(["--config", cfg, "eval", "--netlist", f"{out}/circuit.netlist",
                 "--split", "all", "--packed"]) == 0
    packed = json.loads(capsys.readouterr().out)
    assert main(["--config", cfg, "eval", "--checkpoint", ck, "--split", "all"]) == 0
    ref = json.loads(capsys.readouterr().out)
    assert packed["accuracy"] == ref["accuracy"] and packed["rows"] == 16
    assert main(["--config", cfg, "--out", out, "diagnose", "--checkpoint", ck]) == 0
    for name in ["gradnorms.csv", "histograms.csv", "gap.csv", "concentration.csv",
                 "concentration_summary.csv"]:
        assert (tmp_path / "r" / name).exists()
    summary = {r["scheme"]: r for r in csv.DictReader(open(tmp_path / "r" / "concentration_summary.csv"))}
    assert float(summary["op_gaussian_sigma4"]["iqr"]) > float(summary["op_gaussian_sigma1"]["iqr"])


def test_user_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 3\n")
    assert main(["--config", str(bad), "train"]) == 1
    empty = tmp_path / "e.csv"
    empty.write_text("f,label\n")
    cfg = write_cfg(tmp_path, f"dataset = csv:{empty}\n", "e.cfg")
    assert main(["--config", cfg, "--out", str(tmp_path / "e"), "train"]) == 1
    assert "empty" in capsys.readouterr().err
    assert main(["eval", "--netlist", str(tmp_path / "missing.netlist")]) == 1
    assert main(["diagnose", "--which", "gradnorms"]) == 1


def test_resume_with_wrong_parametrization(tmp_path):
    cfg = write_cfg(tmp_path, "steps = 0\n")
    assert main(["--config", cfg, "--out", str(tmp_path / "r"), "train"]) == 0
    op = write_cfg(tmp_path, "steps = 5\nparametrization = op\ninit = gaussian\n", "op.cfg")
    assert main(["--config", op, "--out", str(tmp_path / "r"), "train",
                 "--resume", str(tmp_path / "r" / "checkpoint.dlgn")]) == 1


def test_numeric_abort_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "steps = 0\n")
    out = tmp_path / "r"
    assert main(["--config", cfg, "--out", str(out), "train"]) == 0
    ck = ckpt.load(out / "checkpoint.dlgn")
    ck.net.layers[1].logits[:] = np.nan
    ckpt.save(out / "nan.dlgn", ck)
    more = write_cfg(tmp_path, "steps = 5\n", "more.cfg")
    assert main(["--config", more, "--out", str(out), "train", "--resume", str(out / "nan.dlgn")]) == 2
    assert "layer 2" in capsys.readouterr().err


def test_console_entry_point_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dlgn.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "train" in r.stdout
