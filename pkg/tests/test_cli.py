"""Command-line interface: exit codes, config validation, file outputs."""
import json

import numpy as np
import pytest

from mssrk.cli import main

RUN1D_CONFIG = {
    "system": "transport2",
    "grid": {"cells": 8, "h": 0.125, "steps": 5, "tau": 0.01},
    "tableaux": {"time": "midpoint", "space": "midpoint"},
    "noise": {"J": 2, "eta": [1.0, 0.25], "seed": 3},
}

MAXWELL_CONFIG = {
    "lambda": 0.5,
    "grid": [2, 2, 2],
    "dx": [0.5, 0.5, 0.5],
    "tau": 0.01,
    "steps": 3,
    "tableaux": "midpoint",
    "noise": {"J": 2, "eta": [1.0, 0.25], "seed": 5},
}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


# ---------------------------------------------------------------------------
# check-tableau
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,code", [
    ("midpoint", 0), ("gauss2", 0), ("gauss3", 0),
    ("euler_explicit", 3), ("rk4", 3),
])
def test_check_tableau_exit_codes(name, code, capsys):
    assert main(["check-tableau", name]) == code
    out = capsys.readouterr().out
    assert ("PASS" if code == 0 else "FAIL") in out
    assert "condition residual matrix" in out


def test_check_tableau_parse_failure(tmp_path, capsys):
    bad = tmp_path / "t.json"
    bad.write_text("{not json")
    assert main(["check-tableau", str(bad)]) == 2
    assert main(["check-tableau", "nosuch"]) == 2


def test_check_tableau_from_file(tmp_path):
    path = tmp_path / "mid.json"
    path.write_text(json.dumps({"stages": 1, "a": [[0.5]], "b": [1.0]}))
    assert main(["check-tableau", str(path)]) == 0


# ---------------------------------------------------------------------------
# run-1d
# ---------------------------------------------------------------------------

def test_run_1d_row_count_and_header(tmp_path):
    cfg = write_config(tmp_path, RUN1D_CONFIG)
    assert main(["run-1d", "--config", cfg, "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "run1d_seed3.csv").read_text().splitlines()
    assert csv[0] == "step,time,ms_residual_max,quadratic_invariant,solver_iterations"
    assert len(csv) == 1 + 5 + 1  # header + initial row + 5 steps
    meta = json.loads((tmp_path / "run1d_seed3.json").read_text())
    assert meta["seed"] == 3 and meta["config"]["system"] == "transport2"


def test_run_1d_zero_steps_single_row(tmp_path):
    data = dict(RUN1D_CONFIG, grid=dict(RUN1D_CONFIG["grid"], steps=0))
    cfg = write_config(tmp_path, data)
    assert main(["run-1d", "--config", cfg, "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "run1d_seed3.csv").read_text().splitlines()
    assert len(csv) == 2


def test_run_1d_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path, RUN1D_CONFIG)
    main(["run-1d", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run-1d", "--config", cfg, "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "run1d_seed3.csv").read_bytes()
    b = (tmp_path / "b" / "run1d_seed3.csv").read_bytes()
    assert a == b


def test_run_1d_seed_override_and_sweep(tmp_path, monkeypatch):
    data = dict(RUN1D_CONFIG, seeds=[1, 2, 3])
    cfg = write_config(tmp_path, data)
    monkeypatch.setenv("MSSRK_THREADS", "3")
    assert main(["run-1d", "--config", cfg, "--out", str(tmp_path)]) == 0
    for s in (1, 2, 3):
        assert (tmp_path / f"run1d_seed{s}.csv").exists()
    assert main(["run-1d", "--config", cfg, "--seed", "9", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "run1d_seed9.csv").exists()


def test_run_1d_rejects_unknown_keys(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(RUN1D_CONFIG, extra=1))
    assert main(["run-1d", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_run_1d_rejects_bad_tableau(tmp_path):
    data = dict(RUN1D_CONFIG, tableaux={"time": "nosuch", "space": "midpoint"})
    cfg = write_config(tmp_path, data)
    assert main(["run-1d", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_run_1d_missing_config_file(tmp_path):
    assert main(["run-1d", "--config", str(tmp_path / "none.json")]) == 2


# ---------------------------------------------------------------------------
# run-maxwell
# ---------------------------------------------------------------------------

def test_run_maxwell_header_and_energy(tmp_path):
    cfg = write_config(tmp_path, MAXWELL_CONFIG)
    assert main(["run-maxwell", "--config", cfg, "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "maxwell_seed5.csv").read_text().splitlines()
    assert csv[0] == "step,time,energy,energy_rel_drift,ms_residual_max,solver_iterations"
    assert len(csv) == 1 + 1 + 3
    drift = [float(line.split(",")[3]) for line in csv[1:]]
    assert max(drift) <= 1e-10


def test_run_maxwell_lambda_zero_energy_constant(tmp_path):
    data = dict(MAXWELL_CONFIG)
    data["lambda"] = 0.0
    cfg = write_config(tmp_path, data)
    assert main(["run-maxwell", "--config", cfg, "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "maxwell_seed5.csv").read_text().splitlines()
    energies = [float(line.split(",")[2]) for line in csv[1:]]
    assert max(energies) - min(energies) <= 1e-12 * max(energies)


def test_run_maxwell_seed_sweep(tmp_path):
    data = dict(MAXWELL_CONFIG, seeds=[1, 2])
    cfg = write_config(tmp_path, data)
    assert main(["run-maxwell", "--config", cfg, "--out", str(tmp_path)]) == 0
    for s in (1, 2):
        lines = (tmp_path / f"maxwell_seed{s}.csv").read_text().splitlines()
        assert max(float(l.split(",")[3]) for l in lines[1:]) <= 1e-10


def test_run_maxwell_rejects_bad_grid(tmp_path):
    cfg = write_config(tmp_path, dict(MAXWELL_CONFIG, grid=[2, 2]))
    assert main(["run-maxwell", "--config", cfg, "--out", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# sample-noise
# ---------------------------------------------------------------------------

def test_sample_noise_outputs_and_determinism(tmp_path, capsys):
    data = {
        "noise": {"J": 2, "eta": [1.0, 0.25], "domain_length": 1.0, "seed": 7},
        "steps": 200,
        "tau": 0.01,
        "points": [0.25, 0.5, 0.75],
    }
    cfg = write_config(tmp_path, data)
    assert main(["sample-noise", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert "variance summary" in capsys.readouterr().out
    assert main(["sample-noise", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "noise.csv").read_bytes() == (tmp_path / "b" / "noise.csv").read_bytes()


def test_sample_noise_zero_eta(tmp_path):
    data = {
        "noise": {"J": 1, "eta": [0.0], "domain_length": 1.0, "seed": 1},
        "steps": 5,
        "tau": 0.1,
        "points": {"count": 3},
    }
    cfg = write_config(tmp_path, data)
    assert main(["sample-noise", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "noise.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[3]) == 0.0 for r in rows)


def test_sample_noise_invalid_spec(tmp_path):
    data = {
        "noise": {"J": 2, "eta": [0.25, 1.0], "domain_length": 1.0, "seed": 1},
        "steps": 5,
        "tau": 0.1,
        "points": [0.5],
    }
    cfg = write_config(tmp_path, data)
    assert main(["sample-noise", "--config", cfg, "--out", str(tmp_path)]) == 2
