import csv
import os
import subprocess
import sys

import pytest

from circfilter.cli import main
from circfilter.config import ConfigError, read_config, resolve


def _data_rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


def _header(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition("=")
            out[key.strip()] = value.strip()
    return out


@pytest.fixture
def traj(tmp_path):
    path = tmp_path / "traj.csv"
    assert main(["simulate", "--kappa-phi", "1", "--kappa-u", "10", "--kappa-z", "5", "--T", "1",
                 "--seed", "7", "--out", str(path)]) == 0
    return path


def test_simulate_row_count(tmp_path):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--kappa-phi", "1", "--kappa-u", "10", "--T", "10", "--dt", "0.01",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    rows = _data_rows(out)
    assert rows[0] == ["t", "phi", "dU", "z"] and len(rows) - 1 == 1001
    head = _header(out)
    assert head["seed"] == "7" and head["kappa_u"] == "10.0" and head["T"] == "10.0"


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--kappa-phi", "1", "--kappa-u", "2", "--T", "1", "--seed", "3", "--out"]
    main(args + [str(tmp_path / "a.csv")])
    main(args + [str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


@pytest.mark.parametrize("name,cols", [
    ("circkf", ["t", "mu", "kappa", "r"]),
    ("gauss_adf", ["t", "mu", "kappa", "r"]),
    ("pf(200)", ["t", "mu", "r"]),
    ("gvm(2)", ["t", "a1", "a2", "b1", "b2"]),
])
def test_filter_command(traj, tmp_path, name, cols):
    out = tmp_path / "trace.csv"
    assert main(["filter", "--trajectory", str(traj), "--filter", name, "--out", str(out)]) == 0
    rows = _data_rows(out)
    assert rows[0] == cols and len(rows) - 1 == 101
    head = _header(out)
    assert head["filter"] == name and head["kappa_z"] == "5.0"


def test_filter_linear(tmp_path):
    traj = tmp_path / "lin.csv"
    assert main(["simulate", "--model", "linear", "--T", "1", "--seed", "1", "--out", str(traj)]) == 0
    out = tmp_path / "g.csv"
    assert main(["filter", "--trajectory", str(traj), "--filter", "gkbf", "--out", str(out)]) == 0
    assert _data_rows(out)[0] == ["t", "mu", "sigma2"]
    assert main(["filter", "--trajectory", str(traj), "--filter", "circkf", "--out", str(out)]) == 3


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[model]\nkappa_u = 5\nkappa_phi = 2\n[experiment]\nseed = 11\n")
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--config", str(cfg), "--kappa-u", "3", "--T", "0.1", "--out", str(out)]) == 0
    head = _header(out)
    assert head["kappa_u"] == "3.0"      # flag beats file
    assert head["kappa_phi"] == "2.0"    # file beats default
    assert head["dt"] == "0.01"          # default
    assert head["seed"] == "11"


def test_resolve_precedence_directly():
    file_values = {"kappa_u": ("5", "f:2"), "kappa_phi": ("2", "f:3")}
    v = resolve(file_values, {"kappa_u": "3"}, {"kappa_phi": "9", "dt": "0.5"})
    assert v["kappa_u"] == 3.0 and v["kappa_phi"] == 2.0 and v["dt"] == 0.5 and v["runs"] == 2000


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[model]\nkappa_u = 5\n\nkappa_uu = 3\n")
    assert main(["mc", "--config", str(cfg)]) == 3
    err = capsys.readouterr().err
    assert f"{cfg}:4" in err and "kappa_uu" in err and "kappa_phi" in err
    with pytest.raises(ConfigError):
        read_config(cfg)


def test_unknown_section_and_bad_value(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[modle]\nkappa_u = 5\n")
    assert main(["mc", "--config", str(cfg)]) == 3
    assert f"{cfg}:1" in capsys.readouterr().err
    cfg.write_text("[experiment]\nruns = many\n")
    assert main(["mc", "--config", str(cfg)]) == 3
    assert "runs" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--bogus", "1", "--out", "x"]) == 2


def test_io_error_exit_5(tmp_path):
    assert main(["filter", "--trajectory", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 5
    assert main(["simulate", "--T", "0.1", "--out", str(tmp_path / "no" / "dir" / "t.csv")]) == 5


def test_domain_errors_exit_3(tmp_path):
    assert main(["simulate", "--kappa-phi", "-1", "--T", "1", "--out", str(tmp_path / "t.csv")]) == 3
    assert main(["simulate", "--kappa-u", "0", "--T", "1", "--out", str(tmp_path / "t.csv")]) == 3


def test_mc_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "mc.cfg"
    cfg.write_text(
        "[model]\nkappa_phi = 1\nkappa_u = 10\n"
        "[experiment]\nfilters = vm_increment, pf(100)\nruns = 20\nT = 1\nseed = 5\n"
        f"[output]\noutput_dir = {tmp_path / 'out'}\n"
    )
    assert main(["mc", "--config", str(cfg), "--record-every", "10"]) == 0
    assert "vm_increment: r_T" in capsys.readouterr().out
    summary = tmp_path / "out" / "summary.csv"
    head = _header(summary)
    assert head["seed"] == "5" and head["filters"] == "vm_increment,pf(100)" and head["record_every"] == "10"
    assert len(_data_rows(summary)) == 1 + 2 * 11


def test_sweep_and_timing_commands(tmp_path, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", "--kappa-z", "1", "--runs", "10", "--T", "0.5", "--parameter", "kappa_z",
                 "--values", "1,10", "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    assert main(["sweep", "--runs", "10", "--T", "0.5"]) == 3
    assert main(["timing", "--kappa-z", "10", "--filters", "circkf,pf(100)", "--T", "0.5",
                 "--repeats", "2", "--out", str(tmp_path / "tm")]) == 0
    assert "circkf:pf" in capsys.readouterr().out
    assert _data_rows(tmp_path / "tm" / "timing.csv")[0] == ["filter", "seconds"]


def test_selftest_exit_0(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_module_entry_point(tmp_path):
    env = dict(os.environ, CIRCFILTER_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-m", "circfilter", "simulate", "--T", "0.05",
                          "--out", str(tmp_path / "t.csv")], capture_output=True, text=True, env=env)
    assert res.returncode == 0, res.stderr
    assert len(_data_rows(tmp_path / "t.csv")) - 1 == 6
