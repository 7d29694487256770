"""JSON experiment configuration.

One file configures everything: robot, stance controller, environment,
swing gains, optimizer, and experiment extras. Each section is optional and
merges over the built-in defaults; unknown section or key names are errors
so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np

from gaitforge.mpc import MpcConfig
from gaitforge.robot import RobotParams
from gaitforge.sim import EnvConfig
from gaitforge.swing import PdGains
from gaitforge.trainer import EsConfig, RolloutSetup


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep and output settings layered over the component configs."""

    speed_grid: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)
    hold_s: float = 5.0
    baseline_gaits: tuple = ("walk", "slow_trot", "rapid_trot", "fly_trot")
    n_seeds: int = 1
    eval_duration_s: float | None = None

    def __post_init__(self):
        grid = tuple(float(s) for s in self.speed_grid)
        for s in grid:
            if not (0.0 < s <= 2.5):
                raise ValueError(f"speed {s} outside (0, 2.5]")
        object.__setattr__(self, "speed_grid", grid)
        object.__setattr__(self, "baseline_gaits",
                           tuple(self.baseline_gaits))
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")


@dataclass(frozen=True)
class FullConfig:
    robot: RobotParams = field(default_factory=RobotParams)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    gains: PdGains = field(default_factory=PdGains)
    z_clearance: float = 0.03
    es: EsConfig = field(default_factory=EsConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def rollout_setup(self) -> RolloutSetup:
        return RolloutSetup(self.robot, self.mpc, self.env, self.gains,
                            self.z_clearance)


_SECTIONS = {
    "robot": RobotParams,
    "mpc": MpcConfig,
    "env": EnvConfig,
    "gains": PdGains,
    "es": EsConfig,
    "experiment": ExperimentConfig,
}


def _build_section(cls, raw: dict):
    known = {f.name for f in fields(cls)}
    bad = set(raw) - known
    if bad:
        raise ValueError(f"unknown key(s) in {cls.__name__}: {sorted(bad)}")
    return cls(**raw)


def load_config(path) -> FullConfig:
    """Read a JSON config file and merge it over defaults."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    bad = set(raw) - set(_SECTIONS) - {"z_clearance"}
    if bad:
        raise ValueError(f"unknown config section(s): {sorted(bad)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ValueError(f"section '{name}' must be an object")
            kwargs[name] = _build_section(cls, raw[name])
    if "z_clearance" in raw:
        kwargs["z_clearance"] = float(raw["z_clearance"])
    return FullConfig(**kwargs)


def _to_jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    return value


def dump_config(config: FullConfig, path) -> None:
    """Serialize the full effective configuration (round-trips exactly)."""
    out = {}
    for name in _SECTIONS:
        section = getattr(config, name)
        out[name] = _to_jsonable(asdict(section))
    out["z_clearance"] = config.z_clearance
    Path(path).write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
