"""CLI behavior: subcommands, flags, exit codes."""

import json

import pytest

from siplab import cli
from siplab.cli import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from siplab.config import ExperimentConfig, ExperimentKind, dump
from siplab.experiments import RunManifest
from siplab.fields import TestFunction, TestFunctionKind
from siplab.jumpkernel import KernelSpec
from siplab.simulate import InitialProfile, ProfileKind


def write_config(tmp_path, **overrides):
    base = dict(kind=ExperimentKind.HYDRO, kernel=KernelSpec(d=1, beta=1.0),
                alpha=1.0, horizon=0.02, snapshot_times=(0.02,),
                profile=InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP,
                                       level=1.0, amplitude=2.0, center=0.5,
                                       width=0.1),
                test_functions=(TestFunction(kind=TestFunctionKind.FOURIER_MODE,
                                             mode=1),),
                replicas=2, n_ladder=(16, 32), out_dir=str(tmp_path / "out"),
                master_seed=5)
    base.update(overrides)
    path = tmp_path / "config.json"
    dump(ExperimentConfig(**base), str(path))
    return str(path)


def test_simulate_runs_config_kind(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["simulate", "--config", cfg]) == EXIT_OK
    assert (tmp_path / "out" / "manifest.json").exists()


def test_out_replicas_seed_overrides(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "elsewhere"
    assert main(["hydro", "--config", cfg, "--out", str(out),
                 "--replicas", "1", "--seed", "99"]) == EXIT_OK
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["config"]["replicas"] == 1
    assert doc["config"]["master_seed"] == 99


def test_missing_config_is_config_error(tmp_path):
    assert main(["hydro", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_schema_violation_is_config_error(tmp_path):
    cfg = write_config(tmp_path)
    doc = json.loads(open(cfg).read())
    doc["surprise"] = 1
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["hydro", "--config", str(path)]) == EXIT_CONFIG


def test_collision_without_force_is_runtime_error(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["hydro", "--config", cfg]) == EXIT_OK
    assert main(["hydro", "--config", cfg]) == EXIT_RUNTIME
    assert main(["hydro", "--config", cfg, "--force"]) == EXIT_OK


def test_sweep_writes_convergence_table(tmp_path):
    cfg = write_config(tmp_path, replicas=3)
    assert main(["sweep", "--config", cfg]) == EXIT_OK
    sweep = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "metric,t,phi,n,value,ok"
    assert len(sweep) > 1


def test_fluctuations_dispatch_on_profile(tmp_path):
    cfg = write_config(tmp_path,
                       profile=InitialProfile(kind=ProfileKind.CONSTANT,
                                              level=1.0),
                       snapshot_times=(0.0, 0.02), replicas=5)
    assert main(["fluctuations", "--config", cfg]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert doc["config"]["kind"] == "stationary_fluct"


def test_check_flag_exit_code(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)

    def fake_run(config, threads=1, force=False):
        return RunManifest(config_hash="x", artifact_version="1", seeds=[],
                           telemetry={}, files={}, manifest_hash="y",
                           verdict={"passed": False})

    monkeypatch.setattr(cli, "run", fake_run)
    assert main(["hydro", "--config", cfg, "--check"]) == EXIT_ACCEPTANCE
    assert main(["hydro", "--config", cfg]) == EXIT_OK


def test_threads_env_var_wins(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    seen = {}

    def fake_run(config, threads=1, force=False):
        seen["threads"] = threads
        return RunManifest(config_hash="x", artifact_version="1", seeds=[],
                           telemetry={}, files={}, manifest_hash="y")

    monkeypatch.setattr(cli, "run", fake_run)
    monkeypatch.setenv("SIPLAB_THREADS", "3")
    assert main(["hydro", "--config", cfg, "--threads", "8"]) == EXIT_OK
    assert seen["threads"] == 3
