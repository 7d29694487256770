"""Swing leg control: foothold selection, a quadratic flight path, and PD
torque tracking through inverse kinematics.

Footholds follow the classic symmetry rule: land half a stance period ahead
of the hip's neutral point at the current base velocity, so the leg sweeps
equally forward and backward while in contact. Positions here live in the
yaw-aligned, gravity-horizontal frame centered at the base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaitforge import engine
from gaitforge.robot import OutOfReachError, RobotParams, inverse_kinematics


@dataclass(frozen=True)
class PdGains:
    """Joint-space swing gains, shared by all three joints of every leg.

    Defaults trade tracking lag against ringing heat: below kp ~ 60 the
    4 Hz gaits miss their footholds and fall, while damping past kd ~ 3
    lags the swing enough to land short at speed. 120/2 keeps every
    baseline gait alive through 2.5 m/s.
    """

    kp: np.ndarray = field(default_factory=lambda: np.full(3, 120.0))
    kd: np.ndarray = field(default_factory=lambda: np.full(3, 2.0))

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=np.float64)
        kd = np.asarray(self.kd, dtype=np.float64)
        if kp.shape != (3,) or kd.shape != (3,):
            raise ValueError("gains must be 3-vectors")
        if np.any(kp < 0) or np.any(kd < 0):
            raise ValueError("gains must be nonnegative")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


@dataclass(frozen=True)
class SwingTrajectory:
    """Per-axis quadratic through lift-off (s=0), mid-air (s=0.5), land (s=1)."""

    lift_off: np.ndarray
    mid_air: np.ndarray
    land: np.ndarray

    def __post_init__(self):
        for name in ("lift_off", "mid_air", "land"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)

    def evaluate(self, s: float) -> np.ndarray:
        out = np.empty(3)
        engine.swing_eval(self.lift_off, self.mid_air, self.land,
                          float(s), out)
        return out


def stance_duration(frequency_hz: float, swing_ratio: float) -> float:
    """Seconds a leg spends on the ground each cycle."""
    if frequency_hz <= 0:
        raise ValueError("frequency must be positive")
    return (1.0 - swing_ratio) / frequency_hz


def raibert_landing(p_ref: np.ndarray, v_com: np.ndarray,
                    t_stance: float) -> np.ndarray:
    """Foothold p_ref + (vx, vy, 0) * t_stance / 2.

    Only the horizontal velocity components matter; the landing keeps
    p_ref's height.
    """
    if t_stance <= 0:
        raise ValueError("t_stance must be positive")
    p_ref = np.asarray(p_ref, dtype=np.float64)
    v = np.asarray(v_com, dtype=np.float64)
    out = p_ref.copy()
    out[0] += v[0] * 0.5 * t_stance
    out[1] += v[1] * 0.5 * t_stance
    return out


def build_trajectory(lift_off: np.ndarray, p_ref: np.ndarray,
                     land: np.ndarray, z_clearance: float = 0.03
                     ) -> SwingTrajectory:
    """Mid-air keypoint sits z_clearance above the reference point."""
    p_ref = np.asarray(p_ref, dtype=np.float64)
    mid = p_ref.copy()
    mid[2] += z_clearance
    return SwingTrajectory(np.asarray(lift_off, dtype=np.float64), mid,
                           np.asarray(land, dtype=np.float64))


def swing_foot_target(traj: SwingTrajectory, phase: float,
                      phase_swing: float) -> np.ndarray:
    """Evaluate the path at progress s = phase / phase_swing."""
    if phase_swing <= 0:
        raise ValueError("phase_swing must be positive")
    if phase < 0 or phase >= phase_swing:
        raise ValueError("leg is not in swing at this phase")
    return traj.evaluate(phase / phase_swing)


def swing_torques(target_base: np.ndarray, leg: int, q: np.ndarray,
                  dq: np.ndarray, gains: PdGains, robot: RobotParams):
    """PD torques toward the IK solution of a base-frame foot target.

    target_base is hip-relative in the base frame. Unreachable targets are
    clamped to the workspace boundary and flagged rather than raised, so an
    aggressive foothold cannot abort an episode. Returns
    (torques (3,), clamped: bool, clip_events: int).
    """
    target = np.asarray(target_base, dtype=np.float64).copy()
    q = np.asarray(q, dtype=np.float64)
    dq = np.asarray(dq, dtype=np.float64)
    clamped = bool(engine.clamp_reach(target, robot.link_lengths, 1e-3))
    try:
        q_des = inverse_kinematics(robot, leg, target)
    except OutOfReachError:
        # numerically marginal after clamping; hold the current posture
        q_des = q.copy()
        clamped = True
    tau = gains.kp * (q_des - q) - gains.kd * dq
    over = np.abs(tau) > robot.torque_limit
    clip_events = int(over.sum())
    tau = np.clip(tau, -robot.torque_limit, robot.torque_limit)
    return tau, clamped, clip_events
