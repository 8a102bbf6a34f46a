"""CLI dispatch, config validation, exit codes, and artifact I/O."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from steady.dataio import ConfigError, load_dataset, save_dataset
from steady.hardware import build_true_system, generate_dataset
from steady.scenarios import run_scenario, validate_config


def run_cli(args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "steady.cli", *args], capture_output=True, text=True, env=env
    )


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_missing_version_rejected():
    with pytest.raises(ConfigError):
        validate_config({"p": 0.25}, "lsq_demo")


def test_wrong_version_rejected():
    with pytest.raises(ConfigError):
        validate_config({"version": 99}, "lsq_demo")


def test_unknown_field_rejected():
    with pytest.raises(ConfigError):
        validate_config({"version": 1, "nonsense": True}, "lsq_demo")


def test_unknown_nested_field_rejected():
    with pytest.raises(ConfigError):
        validate_config({"version": 1, "fit": {"nonsense": 1}}, "fit")


def test_scenario_name_mismatch_rejected():
    with pytest.raises(ConfigError):
        validate_config({"version": 1, "scenario": "fit"}, "lsq_demo")


def test_defaults_merged():
    cfg = validate_config({"version": 1}, "scan_ps")
    assert cfg["P_list"] == [16, 32, 64, 128, 256, 512]
    assert cfg["ladder"]["factor"] == 1.35


def test_cli_exit_codes(tmp_path):
    good = write_config(tmp_path, {"version": 1, "trials": 50})
    res = run_cli(["lsq_demo", "--config", good, "--out", str(tmp_path / "o1")])
    assert res.returncode == 0
    assert (tmp_path / "o1" / "lsq_demo.csv").exists()
    assert (tmp_path / "o1" / "run_manifest.json").exists()

    bad = write_config(tmp_path, {"version": 1, "bogus": 1}, "bad.json")
    res = run_cli(["lsq_demo", "--config", bad, "--out", str(tmp_path / "o2")])
    assert res.returncode == 2

    res = run_cli(["lsq_demo", "--config", str(tmp_path / "missing.json")])
    assert res.returncode == 2

    notjson = tmp_path / "broken.json"
    notjson.write_text("{]")
    res = run_cli(["lsq_demo", "--config", str(notjson)])
    assert res.returncode == 2


def test_cli_bad_threads_env(tmp_path):
    good = write_config(tmp_path, {"version": 1, "trials": 10})
    res = run_cli(
        ["lsq_demo", "--config", good, "--out", str(tmp_path / "o")],
        env_extra={"STEADY_THREADS": "many"},
    )
    assert res.returncode == 2


def test_cli_seed_override_deterministic(tmp_path):
    cfg = write_config(tmp_path, {"version": 1, "trials": 100})
    for sub in ("a", "b"):
        res = run_cli(["lsq_demo", "--config", cfg, "--out", str(tmp_path / sub), "--seed", "9"])
        assert res.returncode == 0
    a = (tmp_path / "a" / "lsq_demo.csv").read_text()
    b = (tmp_path / "b" / "lsq_demo.csv").read_text()
    assert a == b


def test_generate_scenario_roundtrip(tmp_path):
    config = {"version": 1, "P": 4, "S": 8, "T": 0.5, "s": 0.001}
    run_scenario("generate", config, tmp_path / "gen", seed=3)
    ds = load_dataset(tmp_path / "gen" / "dataset.json")
    direct = generate_dataset(build_true_system(), 0.001, 4, 8, duration=0.5, seed=3)
    assert np.array_equal(ds.pulses, direct.pulses)
    assert np.array_equal(ds.observations, direct.observations)
    assert ds.shots == 8


def test_dataset_json_roundtrip(tmp_path):
    sysd = build_true_system()
    for shots in (0, 16):
        ds = generate_dataset(sysd, 0.0, 3, shots, seed=1)
        save_dataset(ds, tmp_path / "d.json")
        back = load_dataset(tmp_path / "d.json")
        assert np.allclose(back.pulses, ds.pulses)
        assert np.allclose(back.observations, ds.observations)
        assert back.shots == ds.shots


def test_dataset_unknown_field_rejected(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"meta": {}, "pulses": [[0.0]], "probs": [[1.0]], "junk": 1}))
    with pytest.raises(ConfigError):
        load_dataset(path)


def test_validate_scenario_reads_report(tmp_path):
    sysd = build_true_system()
    from steady.models import ForwardModel

    model = ForwardModel(basis=sysd.basis, n_drives=12, kind="linear")
    omega = model.pack(sysd.truth)
    report = tmp_path / "fit_report.json"
    report.write_text(json.dumps({"omega_hat": omega.tolist()}))
    run_scenario("validate", {"version": 1, "report": str(report)}, tmp_path / "v", seed=0)
    v = json.loads((tmp_path / "v" / "validate.json").read_text())["V"]
    assert v < 1e-20
