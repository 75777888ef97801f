import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "gp_lab.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    base = json.loads((CONFIG_DIR / "radial_small.json").read_text())
    d = tmp_path_factory.mktemp("cfg")
    p = d / "small.json"
    p.write_text(json.dumps(base, indent=1))
    return p


def test_spectrum_command_and_determinism(small_cfg, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        res = run_cli(["spectrum", "--config", str(small_cfg), "--out", str(out)], tmp_path)
        assert res.returncode == 0, res.stderr
    man = json.loads((out1 / "manifest.json").read_text())
    for name in man["outputs"]:
        assert (out1 / name).exists()
    spec = json.loads((out1 / "spectrum.json").read_text())
    assert spec["eigv_ok"] is True
    # byte-identical JSON/CSV outputs across reruns (manifest carries a timestamp)
    for name, meta in man["outputs"].items():
        if meta["kind"] in ("json", "csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("created"), m2.pop("created")
    assert m1 == m2


def test_bound_state_and_linearize_commands(small_cfg, tmp_path):
    out = tmp_path / "bs"
    res = run_cli(["bound-state", "--config", str(small_cfg), "--out", str(out)], tmp_path)
    assert res.returncode == 0, res.stderr
    br = json.loads((out / "branch.json").read_text())
    assert br["failure"] is None
    assert min(br["interior_slopes"]) > 0
    res = run_cli(["linearize", "--config", str(small_cfg), "--out", str(tmp_path / "lin")], tmp_path)
    assert res.returncode == 0, res.stderr
    lin = json.loads((tmp_path / "lin" / "linearization.json").read_text())
    assert lin["two_E_minus_lambda"] > 0
    assert lin["residuals"]["eigen_residual"] < 1e-8


def test_fgr_then_normal_form_chain(small_cfg, tmp_path):
    out = tmp_path / "fgr"
    res = run_cli(["fgr", "--config", str(small_cfg), "--out", str(out)], tmp_path)
    assert res.returncode == 0, res.stderr
    gam = json.loads((out / "gamma.json").read_text())
    assert gam["K"] > 0
    assert gam["psd_min_scaled_eig"] > -1e-8
    assert (out / "gamma.csv").exists()
    # normal-form consumes the gamma.json written by the fgr run
    res = run_cli(
        ["normal-form", "--config", str(small_cfg), "--out", str(out), "--gamma", str(out / "gamma.json")],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    fit = json.loads((out / "fit.json").read_text())
    assert abs(fit["exponent"] - 0.5) < 0.05
    assert (out / "trajectory.csv").exists()


def test_simulate_command(small_cfg, tmp_path):
    out = tmp_path / "sim"
    res = run_cli(["simulate", "--config", str(small_cfg), "--out", str(out)], tmp_path)
    assert res.returncode == 0, res.stderr
    run = json.loads((out / "run.json").read_text())
    assert run["mass_drift_per_time"] < 1e-10
    assert (out / "run.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert "run.csv" in man["outputs"]


def test_verify_command(small_cfg, tmp_path):
    out = tmp_path / "verify"
    res = run_cli(["verify", "--config", str(small_cfg), "--out", str(out)], tmp_path)
    assert res.returncode == 0, res.stderr
    rep = json.loads((out / "verify.json").read_text())
    assert rep["all_pass"] is True
    names = {c["name"] for c in rep["checks"]}
    assert {"projection_idempotent", "gamma_psd_scaled", "mass_conservation_per_time",
            "N11_orthogonality", "riccati_bound"} <= names


def test_malformed_config_exits_2(small_cfg, tmp_path):
    cfg = json.loads(small_cfg.read_text())
    cfg["grid"]["radial"]["n"] = -5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    res = run_cli(["spectrum", "--config", str(bad), "--out", str(tmp_path / "x")], tmp_path)
    assert res.returncode == 2
    assert "config error" in res.stderr


def test_unknown_key_rejected(small_cfg, tmp_path):
    cfg = json.loads(small_cfg.read_text())
    cfg["grdi"] = {}
    bad = tmp_path / "bad2.json"
    bad.write_text(json.dumps(cfg))
    res = run_cli(["spectrum", "--config", str(bad), "--out", str(tmp_path / "y")], tmp_path)
    assert res.returncode == 2
    assert "unknown key" in res.stderr


def test_unparseable_json_exits_2(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    res = run_cli(["spectrum", "--config", str(bad), "--out", str(tmp_path / "z")], tmp_path)
    assert res.returncode == 2
