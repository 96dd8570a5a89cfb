import json

import numpy as np
import pytest
import yaml

from ferrospec.cli import main
from ferrospec.config import ConfigError, load_config


BASE_SIM = {
    "version": 1,
    "seed": 42,
    "grid": {"n": 8},
    "params": {"nu": 1.0, "sigma": 1.0, "tau": 0.01, "chi0": 1.0},
    "time": {"t_end": 0.5, "n_steps": 8},
    "initial": {"u": {"kind": "zero"}, "m": {"kind": "zero"},
                "r": {"kind": "zero"}},
    "external_field": {"modes": []},
}


def write_cfg(tmp_path, payload, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [list(map(float, line.split(","))) for line in lines[1:]]
    return header, np.array(rows)


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_load_config_round_trip(tmp_path):
    cfg = load_config(write_cfg(tmp_path, BASE_SIM))
    assert cfg.seed == 42
    grid = cfg.build_grid()
    assert grid.n == 8


def test_config_errors_name_offending_keys(tmp_path):
    bad = dict(BASE_SIM, grid={"n": 9})
    with pytest.raises(ConfigError, match="grid.n"):
        load_config(write_cfg(tmp_path, bad))

    bad = dict(BASE_SIM, params={"nu": -1, "sigma": 1, "tau": 1, "chi0": 1})
    with pytest.raises(ConfigError, match="params.nu"):
        load_config(write_cfg(tmp_path, bad))

    bad = dict(BASE_SIM, version=99)
    with pytest.raises(ConfigError, match="version"):
        load_config(write_cfg(tmp_path, bad))

    bad = dict(BASE_SIM)
    bad["external_field"] = {"modes": [{"k": [0, 0, 0],
                                        "amplitude": [1.0, 0.0]}]}
    with pytest.raises(ConfigError, match="external_field.modes"):
        load_config(write_cfg(tmp_path, bad))

    bad = dict(BASE_SIM, time={"t_end": 0.5, "n_steps": 8,
                               "eps_fraction": 1.5})
    with pytest.raises(ConfigError, match="time.eps_fraction"):
        load_config(write_cfg(tmp_path, bad))


def test_cli_odd_grid_exits_1_and_names_key(tmp_path, capsys):
    bad = dict(BASE_SIM, grid={"n": 9})
    code = main(["simulate", "--config", write_cfg(tmp_path, bad),
                 "--output", str(tmp_path / "out")])
    assert code == 1
    assert "grid.n" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate command
# ---------------------------------------------------------------------------

def test_simulate_zero_config(tmp_path):
    out = tmp_path / "out"
    code = main(["simulate", "--config", write_cfg(tmp_path, BASE_SIM),
                 "--output", str(out), "--quiet"])
    assert code == 0
    header, rows = read_csv(out / "norms.csv")
    assert header == ["t", "hs12_u", "hs12_m", "hs12_r",
                      "hs1_u", "hs1_m", "hs1_r", "l4t_h1_running"]
    assert rows.shape == (9, 8)
    assert np.max(np.abs(rows[:, 1:])) == 0.0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok"


def test_simulate_taylor_green_demo_decays(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["grid"] = {"n": 16}
    cfg["initial"] = {"u": {"kind": "taylor-green", "amplitude": 0.05},
                      "m": {"kind": "zero"}, "r": {"kind": "zero"}}
    cfg["time"] = {"t_end": 0.5, "n_steps": 16}
    cfg["simulate"] = {"write_checkpoints": True}
    out = tmp_path / "out"
    code = main(["simulate", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(out), "--quiet"])
    assert code == 0
    _, rows = read_csv(out / "norms.csv")
    hs12_u = rows[:, 1]
    assert np.all(np.diff(hs12_u) < 0)
    assert (out / "final.ckpt").exists()


def test_simulate_blowup_exits_2(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["params"] = {"nu": 1e-6, "sigma": 1e-6, "tau": 1.0, "chi0": 1.0}
    cfg["initial"] = {"u": {"kind": "random-band", "amplitude": 2e5,
                            "kmax": 2, "norm_s": 0.5},
                      "m": {"kind": "zero"}, "r": {"kind": "zero"}}
    cfg["time"] = {"t_end": 2.0, "n_steps": 2}
    out = tmp_path / "out"
    code = main(["simulate", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(out), "--quiet"])
    assert code == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "blow-up"


# ---------------------------------------------------------------------------
# sweep-tau command
# ---------------------------------------------------------------------------

def test_sweep_tau_decoupled_passes(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["grid"] = {"n": 8}
    cfg["initial"] = {"u": {"kind": "taylor-green", "amplitude": 0.05},
                      "m": {"kind": "zero"}, "r": {"kind": "zero"}}
    cfg["time"] = {"t_end": 0.5, "n_steps": 16}
    cfg["sweep"] = {"tau_list": [1e-1, 1e-2], "min_reduction": 1.0}
    out = tmp_path / "out"
    code = main(["sweep-tau", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(out), "--quiet"])
    assert code == 0
    combined = json.loads((out / "sweep_tau.json").read_text())
    assert combined["tau_sweep"]["passed"]
    assert combined["limit_convergence"]["passed"]
    rows = combined["limit_convergence"]["measured"]["rows"]
    assert all(row["sup_u_discrepancy"] < 1e-12 for row in rows)
    assert (out / "norms_tau_0.1.csv").exists()
    assert (out / "norms_tau_0.01.csv").exists()


def test_sweep_tau_ascending_list_exits_1(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["sweep"] = {"tau_list": [1e-3, 1e-2]}
    code = main(["sweep-tau", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(tmp_path / "out"), "--quiet"])
    assert code == 1


# ---------------------------------------------------------------------------
# verify command
# ---------------------------------------------------------------------------

def test_verify_trials_too_small_exits_1(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["verify"] = {"experiments": ["multiplier"], "trials": 0}
    code = main(["verify", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(tmp_path / "out"), "--quiet"])
    assert code == 1


def test_verify_multiplier_only_selection(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["grid"] = {"n": 16}
    cfg["verify"] = {"experiments": ["multiplier"], "trials": 20}
    out = tmp_path / "out"
    code = main(["verify", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(out), "--quiet"])
    assert code == 0
    assert (out / "verify_multiplier.json").exists()
    assert not (out / "verify_parabolic.json").exists()
    summary = json.loads((out / "verify_summary.json").read_text())
    assert summary["passed"] and list(summary["experiments"]) == ["multiplier"]


def test_verify_unknown_experiment_exits_1(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["verify"] = {"experiments": ["spectral-unicorns"]}
    code = main(["verify", "--config", write_cfg(tmp_path, cfg),
                 "--output", str(tmp_path / "out"), "--quiet"])
    assert code == 1


def test_verify_reports_are_byte_identical_for_same_seed(tmp_path):
    cfg = dict(BASE_SIM)
    cfg["grid"] = {"n": 16}
    cfg["time"] = {"t_end": 0.5, "n_steps": 32}
    cfg["verify"] = {"experiments": ["multiplier", "damping"], "trials": 20}
    path = write_cfg(tmp_path, cfg)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["verify", "--config", path, "--output", str(out),
                     "--quiet", "--jobs", "2"]) == 0
        outs.append(out)
    for fname in ("verify_multiplier.json", "verify_damping.json",
                  "verify_summary.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


# ---------------------------------------------------------------------------
# flag/environment plumbing
# ---------------------------------------------------------------------------

def test_env_overrides_mirror_flags(tmp_path, monkeypatch):
    out = tmp_path / "env_out"
    monkeypatch.setenv("FERROSPEC_OUTPUT", str(out))
    monkeypatch.setenv("FERROSPEC_QUIET", "1")
    monkeypatch.setenv("FERROSPEC_SEED", "7")
    code = main(["simulate", "--config", write_cfg(tmp_path, BASE_SIM)])
    assert code == 0
    assert (out / "norms.csv").exists()


def test_seed_flag_beats_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FERROSPEC_SEED", "7")
    cfg = dict(BASE_SIM)
    cfg["grid"] = {"n": 16}
    cfg["initial"] = {"u": {"kind": "random-band", "amplitude": 0.01,
                            "kmax": 2, "norm_s": 0.5},
                      "m": {"kind": "zero"}, "r": {"kind": "zero"}}
    path = write_cfg(tmp_path, cfg)
    out_a, out_b, out_c = (tmp_path / x for x in ("a", "b", "c"))
    assert main(["simulate", "--config", path, "--output", str(out_a),
                 "--seed", "3", "--quiet"]) == 0
    assert main(["simulate", "--config", path, "--output", str(out_b),
                 "--seed", "3", "--quiet"]) == 0
    assert main(["simulate", "--config", path, "--output", str(out_c),
                 "--quiet"]) == 0  # env seed 7
    a = (out_a / "norms.csv").read_bytes()
    b = (out_b / "norms.csv").read_bytes()
    c = (out_c / "norms.csv").read_bytes()
    assert a == b
    assert a != c
