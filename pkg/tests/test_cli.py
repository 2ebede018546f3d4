"""Command line interface: exit codes, artifacts and determinism."""

import json
import math
import os
import subprocess
import sys

import pytest

from reachverify.cli import EXIT_BUDGET, EXIT_ERROR, EXIT_SAFE, EXIT_UNSAFE, main

DECAY = """
[dimensions]
state = x

[mode decay]
d/dt x = -x

[initial]
x = {lo} : {hi}

[unsafe]
{unsafe}

[horizon]
1
"""


def _decay_file(tmp_path, unsafe, lo=0.9, hi=1.1):
    path = tmp_path / "decay.model"
    path.write_text(DECAY.format(lo=lo, hi=hi, unsafe=unsafe))
    return str(path)


def test_verify_safe_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["verify", "builtin:decay", "--out", str(out)]) == EXIT_SAFE
    for name in ("tubes.csv", "tube_x.svg", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"] == "SAFE"
    for key in ("time_sim", "time_discrepancy", "time_io"):
        assert summary[key] >= 0
    text = capsys.readouterr().out
    assert "SAFE" in text and "discr" in text


def test_verify_unsafe_exit_and_witness(tmp_path):
    model = _decay_file(tmp_path, "x >= 1.05")
    out = tmp_path / "out"
    assert main(["verify", model, "--out", str(out), "--no-plot"]) == EXIT_UNSAFE
    assert (out / "witness.csv").exists()
    assert not list(out.glob("*.svg"))


def test_verify_budget_exit(tmp_path):
    model = _decay_file(tmp_path, f"x <= {0.9 * math.exp(-1.0)!r}", 0.9, 1.0)
    assert main(["verify", model, "--budget", "3", "--out", str(tmp_path / "o"), "--no-plot"]) == EXIT_BUDGET


@pytest.mark.parametrize("argv", [
    ["verify", "no/such/file.model"],
    ["verify", "builtin:nonexistent"],
    ["simulate", "builtin:decay", "--input", "missing.csv"],
    ["gamma", "builtin:cardiac", "--box", "zz=0:1"],
    ["gamma", "builtin:cardiac", "--box", "x1=1:0"],
])
def test_error_exit(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["verify", "builtin:decay", "--horizon", "-1"],
    ["verify", "builtin:decay", "--eps0", "0"],
    ["frobnicate", "builtin:decay"],
    [],
])
def test_usage_errors_exit_3(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_ERROR


def test_malformed_model_file_exit(tmp_path, capsys):
    path = tmp_path / "bad.model"
    path.write_text("[dimensions]\nstate = x\n[mode a]\nd/dt x = -y\n[initial]\nx = 0:1\n[horizon]\n1\n")
    assert main(["simulate", str(path), "--out", str(tmp_path)]) == EXIT_ERROR
    assert ":4:" in capsys.readouterr().err


def test_simulate_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["simulate", "builtin:inv-hybrid", "--input", "ramp", "--out", str(out)]) == EXIT_SAFE
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert "trace.csv" in names and "trace_Vout.svg" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_verify_artifacts_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["verify", "builtin:cardiac", "--out", str(out)]) == EXIT_SAFE
        outs.append(out)
    for name in ("tubes.csv", "tube_x1.svg", "tube_x2.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_trace_csv_contents(tmp_path):
    out = tmp_path / "o"
    main(["simulate", "builtin:decay", "--out", str(out)])
    lines = (out / "trace.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert float(rows[-1][header[1]]) == pytest.approx(1.0)
    # every rectangle of the centre trajectory x = exp(-t) contains it over the whole step
    lo = [h for h in header if h.startswith("lo")][0]
    hi = [h for h in header if h.startswith("hi")][0]
    for r in rows:
        for t in (float(r[header[0]]), float(r[header[1]])):
            assert float(r[lo]) <= math.exp(-t) <= float(r[hi])


def test_gamma_box_mode_matches_example(capsys):
    argv = ["gamma", "builtin:cardiac", "--box", "x1=0.4:0.6", "--box", "x2=0.14:0.34", "--ubox", "u=0.1:0.2"]
    assert main(argv) == EXIT_SAFE
    text = capsys.readouterr().out
    assert "-3.06" in text and "-2.1" in text
    g = float(text.split("gamma")[-1].split()[0])
    assert -1.2 <= g <= -0.95


def test_gamma_trace_mode(capsys):
    assert main(["gamma", "builtin:decay"]) == EXIT_SAFE
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t_start,t_end,gamma,beta_end"
    gammas = [float(ln.split(",")[2]) for ln in lines[1:]]
    assert gammas and all(-1.0 - 1e-6 <= g <= -1.0 + 1e-6 for g in gammas)


def test_compare_closed(tmp_path, capsys):
    assert main(["compare-closed", "builtin:cardiac", "--horizon", "4", "--out", str(tmp_path)]) == EXIT_SAFE
    assert (tmp_path / "compare_closed.txt").read_text().strip() == capsys.readouterr().out.strip()
    assert main(["compare-closed", "builtin:decay", "--out", str(tmp_path)]) == EXIT_ERROR


def test_csv_input(tmp_path):
    sig = tmp_path / "u.csv"
    sig.write_text("t,u\n0,0.1\n10,0.1\n")
    out = tmp_path / "o"
    assert main(["simulate", "builtin:cardiac", "--input", str(sig), "--horizon", "2", "--out", str(out)]) == 0
    assert (out / "trace.csv").exists()


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "reachverify", "verify", "builtin:decay", "--out", str(tmp_path),
                          "--no-plot"], capture_output=True, text=True, env=env, timeout=300)
    assert res.returncode == EXIT_SAFE, res.stderr
    res = subprocess.run([sys.executable, "-m", "reachverify", "verify"], capture_output=True, text=True, timeout=300)
    assert res.returncode == EXIT_ERROR
