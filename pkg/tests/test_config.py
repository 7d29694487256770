"""Tests for JSON configuration loading, merging, validation, and the
exact dump/load round trip."""

from __future__ import annotations

import json

import pytest

from gaitforge.config import (
    ExperimentConfig,
    FullConfig,
    dump_config,
    load_config,
)


def write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def test_dump_then_load_round_trips_byte_exactly(tmp_path):
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    dump_config(FullConfig(), first)
    reloaded = load_config(first)
    dump_config(reloaded, second)
    assert first.read_bytes() == second.read_bytes()


def test_partial_file_merges_over_defaults(tmp_path):
    p = write(tmp_path, "c.json", {
        "env": {"v_max": 1.5, "episode_steps": 100},
        "z_clearance": 0.04,
    })
    cfg = load_config(p)
    assert cfg.env.v_max == 1.5
    assert cfg.env.episode_steps == 100
    assert cfg.env.accel == 1.0                 # untouched default
    assert cfg.z_clearance == 0.04
    assert cfg.mpc.horizon_steps == FullConfig().mpc.horizon_steps
    assert cfg.es.population == FullConfig().es.population


def test_unknown_section_is_an_error(tmp_path):
    p = write(tmp_path, "c.json", {"enviroment": {}})
    with pytest.raises(ValueError, match="unknown config section"):
        load_config(p)


def test_unknown_key_is_an_error(tmp_path):
    p = write(tmp_path, "c.json", {"env": {"vmax": 2.0}})
    with pytest.raises(ValueError, match="EnvConfig"):
        load_config(p)


def test_section_must_be_an_object(tmp_path):
    p = write(tmp_path, "c.json", {"env": 3})
    with pytest.raises(ValueError, match="must be an object"):
        load_config(p)


def test_root_must_be_an_object(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(ValueError, match="root"):
        load_config(p)


def test_component_validation_propagates(tmp_path):
    with pytest.raises(ValueError):
        load_config(write(tmp_path, "a.json", {"robot": {"mass": -1.0}}))
    with pytest.raises(ValueError):
        load_config(write(tmp_path, "b.json", {"es": {"algorithm": "sgd"}}))
    with pytest.raises(ValueError):
        load_config(write(tmp_path, "d.json",
                          {"env": {"highlevel_dt": 0.05,
                                   "lowlevel_dt": 0.003}}))


def test_experiment_config_validates_the_speed_grid():
    with pytest.raises(ValueError):
        ExperimentConfig(speed_grid=(0.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(speed_grid=(2.6,))
    with pytest.raises(ValueError):
        ExperimentConfig(n_seeds=0)
    cfg = ExperimentConfig(speed_grid=[1, 2])
    assert cfg.speed_grid == (1.0, 2.0)
    assert all(isinstance(s, float) for s in cfg.speed_grid)


def test_experiment_defaults(tmp_path):
    cfg = ExperimentConfig()
    assert cfg.baseline_gaits == ("walk", "slow_trot", "rapid_trot",
                                  "fly_trot")
    assert cfg.n_seeds == 1
    assert cfg.eval_duration_s is None
    p = write(tmp_path, "c.json",
              {"experiment": {"eval_duration_s": 8.0, "n_seeds": 3}})
    loaded = load_config(p)
    assert loaded.experiment.eval_duration_s == 8.0
    assert loaded.experiment.n_seeds == 3


def test_rollout_setup_mirrors_the_config():
    cfg = FullConfig()
    setup = cfg.rollout_setup()
    assert setup.robot is cfg.robot
    assert setup.mpc is cfg.mpc
    assert setup.env is cfg.env
    assert setup.gains is cfg.gains
    assert setup.z_clearance == cfg.z_clearance
