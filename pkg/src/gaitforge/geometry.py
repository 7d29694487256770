"""Rotation and frame helpers shared by the controller and simulator.

Conventions: world frame is x forward, y left, z up. Base orientation is
ZYX Euler angles (roll, pitch, yaw) applied as R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
Angular velocity is expressed in the world frame.
"""

from __future__ import annotations

import numpy as np


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ u == cross(v, u)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_zyx_to_matrix(euler: np.ndarray) -> np.ndarray:
    """Base-to-world rotation from (roll, pitch, yaw)."""
    roll, pitch, yaw = euler
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def yaw_rate_matrix(yaw: float) -> np.ndarray:
    """Maps world angular velocity to Euler-angle rates at small roll/pitch.

    This is the orientation block of the linearized dynamics; it equals the
    full Euler-rate map evaluated at roll = pitch = 0.
    """
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_rate_matrix(euler: np.ndarray) -> np.ndarray:
    """E(euler) with omega_world = E @ d(euler)/dt, for ZYX angles.

    Columns are the world-frame axes about which each Euler rate rotates:
    roll about Rz@Ry@ex, pitch about Rz@ey, yaw about ez.
    """
    roll, pitch, yaw = euler
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    return np.array([
        [cz * cy, -sz, 0.0],
        [sz * cy, cz, 0.0],
        [-sy, 0.0, 1.0],
    ])


def euler_rates_from_omega(euler: np.ndarray, omega_world: np.ndarray) -> np.ndarray:
    """Invert euler_rate_matrix; singular at |pitch| = pi/2 (gimbal lock)."""
    return np.linalg.solve(euler_rate_matrix(euler), omega_world)


def wrap_two_pi(phase: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    w = float(np.mod(phase, 2.0 * np.pi))
    # np.mod of a tiny negative value rounds up to the modulus itself
    return 0.0 if w >= 2.0 * np.pi else w


def wrap_pi(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = np.mod(angle + np.pi, 2.0 * np.pi) - np.pi
    return float(np.pi) if w == -np.pi else float(w)
