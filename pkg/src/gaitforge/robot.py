"""Robot description and analytic leg kinematics.

Each leg has three actuated joints: abduction (roll about x at the hip),
hip pitch (about y), knee pitch (about y). At the zero configuration the leg
hangs straight down, so the foot sits at hip + (0, 0, -(l_thigh + l_calf)).
All leg-level quantities live in the base frame (x forward, y left, z up)
relative to the hip point of that leg.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from gaitforge import engine

LEG_NAMES = ("FR", "FL", "RR", "RL")


class OutOfReachError(ValueError):
    """Foot target outside the kinematic workspace of the leg."""


def _default_hip_offsets():
    return np.array([
        [0.183, -0.13, 0.0],   # FR
        [0.183, 0.13, 0.0],    # FL
        [-0.183, -0.13, 0.0],  # RR
        [-0.183, 0.13, 0.0],   # RL
    ])


def _default_inertia():
    return np.diag([0.07, 0.26, 0.24])


@dataclass
class RobotParams:
    """Mass, geometry and actuator limits of the quadruped."""

    mass: float = 15.0
    gravity: float = 9.8
    standing_height: float = 0.26
    hip_offsets: np.ndarray = field(default_factory=_default_hip_offsets)
    side_sign: np.ndarray = field(
        default_factory=lambda: np.array([-1.0, 1.0, -1.0, 1.0]))
    link_lengths: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.2, 0.2]))
    base_inertia: np.ndarray = field(default_factory=_default_inertia)
    torque_limit: float = 33.5
    motor_alpha: float = 0.3
    joint_inertia: float = 0.06
    joint_friction: float = 0.01

    def __post_init__(self):
        self.hip_offsets = np.asarray(self.hip_offsets, dtype=np.float64)
        self.side_sign = np.asarray(self.side_sign, dtype=np.float64)
        self.link_lengths = np.asarray(self.link_lengths, dtype=np.float64)
        self.base_inertia = np.asarray(self.base_inertia, dtype=np.float64)
        if self.hip_offsets.shape != (4, 3):
            raise ValueError("hip_offsets must be (4, 3)")
        if self.side_sign.shape != (4,):
            raise ValueError("side_sign must have 4 entries")
        if self.link_lengths.shape != (3,):
            raise ValueError("link_lengths must be (l_ab, l_thigh, l_calf)")
        if self.base_inertia.shape != (3, 3):
            raise ValueError("base_inertia must be (3, 3)")
        if self.mass <= 0 or self.gravity <= 0:
            raise ValueError("mass and gravity must be positive")
        if np.any(self.link_lengths[1:] <= 0):
            raise ValueError("thigh and calf lengths must be positive")

    @classmethod
    def from_json(cls, path) -> "RobotParams":
        """Load parameters from a JSON object keyed by field name.

        Missing keys keep their defaults; unknown keys are an error so typos
        do not silently configure nothing.
        """
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        bad = set(raw) - known
        if bad:
            raise ValueError(f"unknown robot parameter(s): {sorted(bad)}")
        return cls(**raw)

    @property
    def max_reach(self) -> float:
        return float(self.link_lengths[1] + self.link_lengths[2])

    def nominal_foot_positions(self) -> np.ndarray:
        """Feet below the hips at standing height, base frame (4, 3)."""
        feet = self.hip_offsets.copy()
        feet[:, 2] -= self.standing_height
        return feet


def forward_kinematics(params: RobotParams, leg: int,
                       q: np.ndarray) -> np.ndarray:
    """Foot position relative to the hip for joint angles q (3,)."""
    q = np.asarray(q, dtype=np.float64)
    out = np.empty(3)
    engine.leg_fk(q, params.side_sign[leg], params.link_lengths, out)
    return out


def inverse_kinematics(params: RobotParams, leg: int,
                       p: np.ndarray) -> np.ndarray:
    """Joint angles reaching a hip-relative foot target p (3,).

    Uses the knee-backward branch (knee angle in [-pi, 0]). Raises
    OutOfReachError when the target is outside the workspace.
    """
    p = np.asarray(p, dtype=np.float64)
    out = np.empty(3)
    if not engine.leg_ik(p, params.side_sign[leg], params.link_lengths, out):
        raise OutOfReachError(
            f"leg {LEG_NAMES[leg]}: target {p.tolist()} not reachable")
    return out


def foot_jacobian(params: RobotParams, leg: int,
                  q: np.ndarray) -> np.ndarray:
    """3x3 Jacobian of the hip-relative foot position w.r.t. joint angles."""
    q = np.asarray(q, dtype=np.float64)
    out = np.empty((3, 3))
    engine.leg_jac(q, params.side_sign[leg], params.link_lengths, out)
    return out
