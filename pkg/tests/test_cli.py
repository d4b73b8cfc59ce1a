import subprocess
import sys

import numpy as np
import pytest

from qmifilter import cli, fileio


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_gen_data_is_deterministic(tmp_path, capsys):
    assert run("gen-data", "--example", 1, "--seed", 5, "--out", tmp_path / "a") == 0
    assert run("gen-data", "--example", 1, "--seed", 5, "--out", tmp_path / "b") == 0
    for name in ("x", "x_next", "y", "wp"):
        a = (tmp_path / "a" / "data" / f"{name}.csv").read_bytes()
        assert a == (tmp_path / "b" / "data" / f"{name}.csv").read_bytes()
    assert fileio.read_matrix(tmp_path / "a" / "data" / "x.csv").shape == (2, 50)
    assert fileio.read_config(tmp_path / "a" / "scenario.cfg")["data.seed"] == 5
    assert "wrote 50 samples" in capsys.readouterr().out


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("example = 2\ndata.N = 12\ndata.seed = 1\n")
    assert run("gen-data", "--config", cfg, "--seed", 3, "--out", tmp_path) == 0
    entries = fileio.read_config(tmp_path / "scenario.cfg")
    assert entries["data.N"] == 12 and entries["data.seed"] == 3


def test_build_sets_writes_index(tmp_path):
    assert run("build-sets", "--example", 2, "--seed", 0, "--out", tmp_path) == 0
    index = (tmp_path / "sets" / "index.csv").read_text().splitlines()
    assert index[0] == "name,block,p,n,file"
    for line in index[1:]:
        rel = line.split(",")[-1]
        assert fileio.read_matrix(tmp_path / rel).ndim == 2


def test_synth_then_validate(tmp_path, capsys):
    assert run("synth", "--example", 2, "--seed", 7, "--prior", "PriorBall", "--constraints", "Sigma_D", "--out", tmp_path) == 0
    res = tmp_path / "result"
    gamma = fileio.read_config(res / "result.cfg")["gamma"]
    assert f"gamma = {gamma:.10g}" in capsys.readouterr().out
    assert run("validate", "--out", tmp_path, "--samples", 20) == 0
    assert "certified gamma" in capsys.readouterr().out


def test_tampered_gamma_is_refuted(tmp_path, capsys):
    assert run("synth", "--example", 2, "--seed", 7, "--prior", "Sigma0_L", "--constraints", "none", "--out", tmp_path) == 0
    meta = fileio.read_config(tmp_path / "result" / "result.cfg")
    meta["gamma"] = meta["gamma"] / 2
    fileio.write_text(tmp_path / "result" / "result.cfg", fileio.format_config(meta))
    assert run("validate", "--out", tmp_path, "--samples", 20) == 2
    assert "REFUTED" in capsys.readouterr().out


def test_reproduce_writes_tables(tmp_path):
    out = tmp_path / "r"
    assert run("reproduce", "--example", 2, "--seed", 7, "--samples", 3, "--workers", 2, "--out", out) == 0
    csv = (out / "table.csv").read_text().splitlines()
    assert len(csv) == 5
    values = [float(v) for line in csv[1:] for v in line.split(",")[1:]]
    assert all(np.isfinite(values))
    assert (out / "table.md").read_text().startswith("| constraints")


def test_selftest_passes(capsys):
    assert run("selftest") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6 and all(line.startswith("PASS") for line in lines)


def test_errors_exit_one(tmp_path, capsys):
    assert run("validate", "--out", tmp_path / "missing") == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("example = 2\ndata.bogus = 1\n")
    assert run("gen-data", "--config", bad, "--out", tmp_path) == 1
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        run("reproduce", "--example", 3)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qmifilter", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "reproduce" in out.stdout
