import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tankmix import cli
from tankmix import io as tio


def run_ok(args, capsys=None):
    code = cli.main(args)
    assert code == 0
    return code


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --------------------------------------------------------------------------- formatting


@pytest.mark.parametrize("v", [0.1, 1 / 3, 1e-300, 123456789.123456789, 2.0**-1074])
def test_float_format_round_trips(v):
    s = tio.fmt(v)
    assert float(s) == v and "," not in s


def test_csv_layout(tmp_path):
    p = tio.write_csv(tmp_path / "a.csv", ["t", "x"], [[0.1, 1], [0.2, True]])
    raw = p.read_bytes()
    assert raw == b"t,x\n0.10000000000000001,1\n0.20000000000000001,1\n"
    data = tio.read_csv(p)
    assert data["t"].tolist() == [0.1, 0.2]


# --------------------------------------------------------------------------- commands


def test_tv_decay_planted_input(tmp_path):
    t = np.geomspace(5, 80, 6)
    tio.write_csv(tmp_path / "in.csv", ["t", "tv"], zip(t, 3 * t**-2.0))
    run_ok(["tv-decay", "--set", f"input={json.dumps(str(tmp_path / 'in.csv'))}", "--out", str(tmp_path / "o")])
    fit = read_json(tmp_path / "o" / "fit.json")
    assert {"law", "exponent", "amplitude", "r2", "window"} <= set(fit)
    assert fit["law"] == "power"
    assert fit["exponent"] == pytest.approx(2.0, abs=0.01) and fit["r2"] > 0.999


def test_equilibrium_reports_tank_mean(tmp_path):
    run_ok(["equilibrium", "--set", "ensemble_size=1000000", "--seed", "3", "--out", str(tmp_path)])
    rep = read_json(tmp_path / "moments.json")
    assert abs(rep["mean_y"] - 0.2) < 3 * rep["mean_y_stderr"]
    with open(tmp_path / "pi_samples.csv") as fh:
        assert fh.readline().strip() == "t,trajectory_id,x1,x2,y"


SMALL = {
    "simulate": ["--set", "t_end=20", "--set", "ensemble_size=500", "--set", "times=[1,5,20]"],
    "equilibrium": ["--set", "ensemble_size=2000"],
    "tv-decay": ["--set", "ensemble_size=3000"],
    "drift-check": ["--set", "ensemble_size=2000", "--set", "grid_per_axis=8"],
    "passage": ["--set", "ensemble_size=3000", "--set", "n_small=1000", "--set", "eps_a=0.05"],
    "kac-compare": ["--set", "ensemble_size=3000"],
}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_byte_identical_across_workers(tmp_path, command):
    outs = []
    for w in (1, 8):
        d = tmp_path / f"w{w}"
        run_ok([command, *SMALL[command], "--seed", "11", "--workers", str(w), "--out", str(d)])
        outs.append(d)
    man = read_json(outs[0] / "manifest.json")
    assert man["seed"] == 11 and man["version"] and man["wall_time_s"] >= 0
    for name in man["outputs"]:
        if name.endswith(".csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_rerun_from_manifest(tmp_path):
    run_ok(["simulate", "--set", "t_end=30", "--seed", "5", "--out", str(tmp_path / "a")])
    run_ok(["simulate", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    header = a.split(b"\n", 1)[0]
    assert header == b"t,event_index,particle,u,x1,x2,y"


def test_trajectory_csv_round_trip(tmp_path):
    run_ok(["simulate", "--set", "t_end=50", "--set", "m=3", "--out", str(tmp_path)])
    d = tio.read_csv(tmp_path / "trajectory.csv")
    states = np.column_stack([d["x1"], d["x2"], d["x3"], d["y"]])
    assert np.all(np.abs(states.sum(axis=1) - 1.0) <= 8 * np.finfo(float).eps)
    assert np.all(np.diff(d["t"]) > 0) and set(d["particle"]) <= {1.0, 2.0, 3.0}


def test_kac_simulate_header(tmp_path):
    run_ok(["simulate", "--set", 'model="kac"', "--set", "t_end=2", "--set", "n_particles=4", "--out", str(tmp_path)])
    with open(tmp_path / "kac.csv") as fh:
        assert fh.readline().strip() == "t,v1,v2,v3,v4"


def test_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "m": 3, "t_end": 5, "out": str(tmp_path / "x")}))
    monkeypatch.setenv("TANKMIX_WORKERS", "3")
    run_ok(["simulate", "--config", str(cfg), "--set", "m=2", "--seed", "9", "--out", str(tmp_path / "y")])
    man = read_json(tmp_path / "y" / "manifest.json")
    assert man["config"]["m"] == 2 and man["seed"] == 9 and man["workers"] == 3
    assert not (tmp_path / "x").exists()


@pytest.mark.parametrize(
    "args,code",
    [
        (["bogus"], 2),
        (["simulate", "--set", "m=0", "--set", "t_end=1"], 2),
        (["simulate"], 2),
        (["simulate", "--set", "t_end=1", "--set", "nope=1"], 2),
        (["simulate", "--set", "t_end=1", "--set", "initial=[0.5,0.6,0.1]"], 2),
        (["drift-check", "--set", "eps0=0.5"], 2),
        (["passage", "--set", "h=5"], 2),
        (["tv-decay", "--set", 'input="/nonexistent.csv"'], 2),
        (["simulate", "--config", "/nonexistent.json"], 3),
    ],
)
def test_errors_are_machine_readable(args, code, capsys, tmp_path):
    assert cli.main([*args, "--out", str(tmp_path)]) == code
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == code and err["error"] and err["message"]


def test_bad_json_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli.main(["simulate", "--config", str(cfg)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "tankmix.cli", "equilibrium", "--set", "ensemble_size=100",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["ok"] is True
    r = subprocess.run([sys.executable, "-m", "tankmix.cli", "equilibrium", "--workers", "0"],
                       capture_output=True, text=True)
    assert r.returncode == 2 and json.loads(r.stderr)["error"] == "ConfigError"
