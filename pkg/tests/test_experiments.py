"""Harness tests: drivers, manifests, determinism, parallel map."""

import json
import os

import numpy as np
import pytest

from siplab.config import ConfigError, ExperimentConfig, ExperimentKind
from siplab.experiments import (RunManifest, coarse_bin, config_hash,
                                resolve_threads, run, sweep_report)
from siplab.fields import TestFunction, TestFunctionKind
from siplab.jumpkernel import KernelSpec
from siplab.simulate import InitialProfile, ProfileKind


def bump():
    return InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP, level=1.0,
                          amplitude=2.0, center=0.5, width=0.1)


def cos1():
    return TestFunction(kind=TestFunctionKind.FOURIER_MODE, mode=1)


def hydro_config(out_dir, **overrides):
    base = dict(kind=ExperimentKind.HYDRO, kernel=KernelSpec(d=1, beta=1.0),
                alpha=1.0, horizon=0.05, snapshot_times=(0.05,),
                profile=bump(), test_functions=(cos1(),), replicas=3,
                n_ladder=(16, 32), out_dir=str(out_dir), master_seed=11)
    base.update(overrides)
    return ExperimentConfig(**base)


def test_hydro_zero_horizon_single_replica(tmp_path):
    """R = 1, T = 0: the run degenerates to an initial-profile comparison."""
    cfg = hydro_config(tmp_path / "a", horizon=0.0, snapshot_times=(0.0,),
                       replicas=1, n_ladder=(16,))
    manifest = run(cfg)
    assert "density_n16.csv" in manifest.files
    assert (tmp_path / "a" / "manifest.json").exists()
    # at t = 0 the prediction is the initial profile itself
    rows = (tmp_path / "a" / "density_n16.csv").read_text().splitlines()[1:]
    pred = [float(r.split(",")[4]) for r in rows]
    assert pred == pytest.approx(list(bump().grid_values(16)), rel=1e-12)


def test_rerun_is_byte_identical(tmp_path):
    m1 = run(hydro_config(tmp_path / "r1"))
    m2 = run(hydro_config(tmp_path / "r2"))
    assert m1.files == m2.files
    assert m1.manifest_hash == m2.manifest_hash
    for name in m1.files:
        a = (tmp_path / "r1" / name).read_bytes()
        b = (tmp_path / "r2" / name).read_bytes()
        assert a == b


def test_parallel_map_matches_sequential(tmp_path):
    m1 = run(hydro_config(tmp_path / "seq"), threads=1)
    m2 = run(hydro_config(tmp_path / "par"), threads=2)
    assert m1.files == m2.files
    assert m1.manifest_hash == m2.manifest_hash


def test_output_collision_requires_force(tmp_path):
    cfg = hydro_config(tmp_path / "c")
    run(cfg)
    with pytest.raises(FileExistsError):
        run(cfg)
    run(cfg, force=True)  # no error


def test_config_hash_ignores_out_dir(tmp_path):
    a = hydro_config(tmp_path / "x")
    b = hydro_config(tmp_path / "y")
    assert config_hash(a) == config_hash(b)
    c = hydro_config(tmp_path / "x", master_seed=12)
    assert config_hash(a) != config_hash(c)


def test_manifest_records_seeds_and_files(tmp_path):
    cfg = hydro_config(tmp_path / "m")
    manifest = run(cfg)
    assert isinstance(manifest, RunManifest)
    assert len(manifest.seeds) == 2 * 2 * 3  # ladder x streams x replicas
    doc = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert doc["config_hash"] == manifest.config_hash
    assert set(doc["files"]) == set(manifest.files)
    assert doc["config"]["kind"] == "hydro"


def test_sweep_report_zero_errors_trivially_monotone():
    manifest = RunManifest(config_hash="", artifact_version="1", seeds=[],
                           telemetry={}, files={},
                           results={"l1_by_n": {0.1: {32: 0.0, 64: 0.0}},
                                    "var_by_phi": {}})
    rows = sweep_report(manifest)
    assert all(row[4] == 0.0 for row in rows)
    assert all(row[5] == 1 for row in rows)  # monotone verdict


def test_sweep_report_needs_ladder():
    manifest = RunManifest(config_hash="", artifact_version="1", seeds=[],
                           telemetry={}, files={},
                           results={"l1_by_n": {0.1: {32: 0.1}},
                                    "var_by_phi": {}})
    with pytest.raises(ValueError):
        sweep_report(manifest)


def test_stationary_requires_constant_profile(tmp_path):
    cfg = hydro_config(tmp_path / "s", kind=ExperimentKind.STATIONARY_FLUCT,
                       snapshot_times=(0.0, 0.05))
    with pytest.raises(ConfigError):
        run(cfg)


def test_noneq_requires_snapshot_grid_from_zero(tmp_path):
    cfg = hydro_config(tmp_path / "q", kind=ExperimentKind.NONEQ_FLUCT,
                       snapshot_times=(0.05,))
    with pytest.raises(ConfigError):
        run(cfg)


def test_coarse_bin():
    v = np.arange(8, dtype=float)
    assert coarse_bin(v, 4).tolist() == [0.5, 2.5, 4.5, 6.5]
    with pytest.raises(ValueError):
        coarse_bin(v, 3)


def test_resolve_threads_env_override(monkeypatch):
    monkeypatch.delenv("SIPLAB_THREADS", raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(4) == 4
    monkeypatch.setenv("SIPLAB_THREADS", "2")
    assert resolve_threads(8) == 2
    monkeypatch.setenv("SIPLAB_THREADS", "junk")
    with pytest.raises(ConfigError):
        resolve_threads(1)
    monkeypatch.setenv("SIPLAB_THREADS", "0")
    with pytest.raises(ConfigError):
        resolve_threads(1)


def test_duality_driver_verdict(tmp_path):
    cfg = hydro_config(tmp_path / "d", kind=ExperimentKind.DUALITY_CHECK,
                       horizon=0.05, snapshot_times=(0.05,), replicas=200)
    manifest = run(cfg)
    assert "duality.csv" in manifest.files
    assert manifest.verdict["passed"]
