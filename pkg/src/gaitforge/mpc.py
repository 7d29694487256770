"""Stance force control: linear centroidal model, reference rollout, and the
condensed finite-horizon QP over ground reaction forces.

The model treats the robot as a single rigid body with massless legs pushing
at point feet. States are x = [euler, position, omega, velocity] (12). The
orientation block is linearized about small roll/pitch with the yaw-rate map,
forces enter through I_world^-1 [r]x and 1/m, and gravity is an affine term.
States are eliminated through the Euler-discretized recursion so the QP
decision variables are only the stance-leg forces over the horizon.

This module is the plain-numpy reference path; the simulator runs a fused
compiled equivalent (engine.mpc_solve) that is tested against this one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaitforge import qp
from gaitforge.geometry import euler_zyx_to_matrix, skew, yaw_rate_matrix
from gaitforge.robot import RobotParams


class SingularInertia(ValueError):
    """World-frame inertia is numerically singular (corrupted state)."""


class MpcInfeasible(RuntimeError):
    """The stance-force QP reported infeasibility."""


def _default_state_weights():
    return np.array([50.0, 50.0, 50.0, 10.0, 10.0, 100.0,
                     1.0, 1.0, 1.0, 10.0, 10.0, 30.0])


@dataclass(frozen=True)
class CentroidalState:
    """Base state in world coordinates; angles are ZYX Euler (roll, pitch, yaw)."""

    euler_zyx: np.ndarray
    position: np.ndarray
    angular_velocity: np.ndarray
    linear_velocity: np.ndarray

    def __post_init__(self):
        for name in ("euler_zyx", "position", "angular_velocity",
                     "linear_velocity"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.euler_zyx, self.position,
                               self.angular_velocity, self.linear_velocity])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "CentroidalState":
        x = np.asarray(x, dtype=np.float64)
        return cls(x[0:3], x[3:6], x[6:9], x[9:12])


@dataclass(frozen=True)
class MpcConfig:
    horizon_steps: int = 10
    dt_mpc: float = 0.025
    state_weights: np.ndarray = field(default_factory=_default_state_weights)
    force_weight: float = 1e-4
    friction_mu: float = 0.45
    fz_min: float = 2.0
    fz_max: float = 120.0
    replan_dt: float = 0.002
    qp_tolerance: float = 1e-8
    qp_max_iterations: int = 50
    qp_regularization: float = 1e-8
    fallback_steps: int = 5

    def __post_init__(self):
        w = np.asarray(self.state_weights, dtype=np.float64)
        if w.shape != (12,) or np.any(w < 0):
            raise ValueError("state_weights must be 12 nonnegative values")
        object.__setattr__(self, "state_weights", w)
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if self.dt_mpc <= 0 or self.replan_dt <= 0:
            raise ValueError("time steps must be positive")
        if not (0 < self.fz_min < self.fz_max):
            raise ValueError("need 0 < fz_min < fz_max")
        if self.friction_mu <= 0 or self.force_weight < 0:
            raise ValueError("friction_mu > 0 and force_weight >= 0 required")


@dataclass(frozen=True)
class GrfCommand:
    """World-frame ground reaction forces on the robot, one row per leg.

    Swing-leg rows are exactly zero; stance rows satisfy the friction/box
    constraints of the solve that produced them.
    """

    forces: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forces, dtype=np.float64)
        if f.shape != (4, 3):
            raise ValueError("forces must be (4, 3)")
        object.__setattr__(self, "forces", f)

    @property
    def total_vertical(self) -> float:
        return float(self.forces[:, 2].sum())


def build_continuous_dynamics(state: CentroidalState,
                              foot_positions: np.ndarray,
                              params: RobotParams):
    """Continuous model x_dot = A x + B u + g_aff about the current state.

    foot_positions: (4, 3) feet relative to the base, world frame. A carries
    the yaw-rate map in the (euler, omega) block and identity in
    (position, velocity); B maps leg forces to omega via I_world^-1 [r_i]x
    and to velocity via I/m; gravity enters as an affine vertical pull.
    """
    feet = np.asarray(foot_positions, dtype=np.float64)
    if feet.shape != (4, 3):
        raise ValueError("foot_positions must be (4, 3)")
    A = np.zeros((12, 12))
    A[0:3, 6:9] = yaw_rate_matrix(state.euler_zyx[2])
    A[3:6, 9:12] = np.eye(3)
    R = euler_zyx_to_matrix(state.euler_zyx)
    I_world = R @ params.base_inertia @ R.T
    cond = np.linalg.cond(I_world)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInertia(f"world inertia condition number {cond:.3e}")
    I_inv = np.linalg.inv(I_world)
    B = np.zeros((12, 12))
    for leg in range(4):
        B[6:9, 3 * leg:3 * leg + 3] = I_inv @ skew(feet[leg])
        B[9:12, 3 * leg:3 * leg + 3] = np.eye(3) / params.mass
    g_aff = np.zeros(12)
    g_aff[11] = -params.gravity
    return A, B, g_aff


def discretize(A: np.ndarray, B: np.ndarray, g_aff: np.ndarray,
               dt_mpc: float):
    """Forward-Euler zero-order hold: x+ = (I + A dt) x + (B dt) u + g dt."""
    if dt_mpc <= 0:
        raise ValueError("dt_mpc must be positive")
    n = A.shape[0]
    return np.eye(n) + A * dt_mpc, B * dt_mpc, g_aff * dt_mpc


def build_reference(current: CentroidalState, desired_velocity: np.ndarray,
                    config: MpcConfig,
                    standing_height: float = 0.26) -> np.ndarray:
    """(T, 12) reference: flat orientation, commanded velocity, integrated
    horizontal position from the current one, constant standing height."""
    v = np.asarray(desired_velocity, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError("desired_velocity must be a 3-vector")
    T = config.horizon_steps
    ref = np.zeros((T, 12))
    for t in range(1, T + 1):
        r = ref[t - 1]
        r[3:6] = current.position + v * (t * config.dt_mpc)
        r[5] = standing_height
        r[9:12] = v
    return ref


def condense(A_d: np.ndarray, B_d: np.ndarray, g_d: np.ndarray,
             x0: np.ndarray, contacts: np.ndarray, horizon: int):
    """Eliminate states from the horizon recursion.

    Returns (B_qp, x_free, active) with x_t = x_free_t + B_qp u_act stacked
    over t = 1..T; active is the list of (step, leg) per 3-column block.
    """
    T = horizon
    contacts = np.asarray(contacts, dtype=bool)
    if contacts.shape != (T, 4):
        raise ValueError("contacts must be (T, 4)")
    powers = [np.eye(12)]
    for _ in range(T):
        powers.append(A_d @ powers[-1])
    x_free = np.zeros(12 * T)
    xf = x0.copy()
    for t in range(1, T + 1):
        xf = A_d @ xf + g_d
        x_free[12 * (t - 1):12 * t] = xf
    active = [(k, leg) for k in range(T) for leg in range(4)
              if contacts[k, leg]]
    n = 3 * len(active)
    B_qp = np.zeros((12 * T, n))
    for b, (k, leg) in enumerate(active):
        cols = B_d[:, 3 * leg:3 * leg + 3]
        for t in range(k + 1, T + 1):
            B_qp[12 * (t - 1):12 * t, 3 * b:3 * b + 3] = (
                powers[t - 1 - k] @ cols)
    return B_qp, x_free, active


def friction_block(config: MpcConfig):
    """Per-stance-leg rows F f <= h: fz box and a 4-face friction pyramid."""
    mu = config.friction_mu
    F = np.array([
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, -mu],
        [-1.0, 0.0, -mu],
        [0.0, 1.0, -mu],
        [0.0, -1.0, -mu],
    ])
    h = np.array([-config.fz_min, config.fz_max, 0.0, 0.0, 0.0, 0.0])
    return F, h


class StanceForceOptimizer:
    """Owns the condensing pipeline and a warm-started QP workspace."""

    def __init__(self, config: MpcConfig, robot: RobotParams):
        self.config = config
        self.robot = robot
        self._solver = qp.QpSolver(config.qp_tolerance,
                                   config.qp_max_iterations,
                                   config.qp_regularization)
        self._last_pattern = None
        self.last_solution = None

    def solve(self, state: CentroidalState, foot_positions: np.ndarray,
              contacts: np.ndarray, desired_velocity: np.ndarray,
              reference: np.ndarray | None = None) -> GrfCommand:
        cfg = self.config
        T = cfg.horizon_steps
        contacts = np.asarray(contacts, dtype=bool)
        if reference is None:
            reference = build_reference(state, desired_velocity, cfg,
                                        self.robot.standing_height)
        reference = np.asarray(reference, dtype=np.float64)
        if reference.shape != (T, 12):
            raise ValueError("reference must be (horizon_steps, 12)")

        A, B, g_aff = build_continuous_dynamics(state, foot_positions,
                                                self.robot)
        A_d, B_d, g_d = discretize(A, B, g_aff, cfg.dt_mpc)
        B_qp, x_free, active = condense(A_d, B_d, g_d, state.as_vector(),
                                        contacts, T)
        n = 3 * len(active)
        forces = np.zeros((4, 3))
        if n == 0:
            self.last_solution = None
            return GrfCommand(forces)

        q_bar = np.tile(cfg.state_weights, T)
        e = x_free - reference.reshape(-1)
        H = 2.0 * (B_qp.T @ (q_bar[:, None] * B_qp)
                   + cfg.force_weight * np.eye(n))
        H = 0.5 * (H + H.T)
        c = 2.0 * (B_qp.T @ (q_bar * e))
        F, h6 = friction_block(cfg)
        nblk = len(active)
        G = np.kron(np.eye(nblk), F)
        h = np.tile(h6, nblk)

        pattern = contacts.tobytes()
        warm = pattern == self._last_pattern
        problem = qp.QpProblem(H, c, G, h)
        sol = self._solver.solve(problem, warm_start=warm)
        self.last_solution = sol
        if sol.status == qp.QpStatus.INFEASIBLE:
            self._last_pattern = None
            raise MpcInfeasible("stance force QP infeasible")
        self._last_pattern = pattern
        for b, (k, leg) in enumerate(active):
            if k == 0:
                forces[leg] = sol.u[3 * b:3 * b + 3]
        return GrfCommand(forces)


def assemble_and_solve(state: CentroidalState, foot_positions: np.ndarray,
                       contacts: np.ndarray, desired_velocity: np.ndarray,
                       config: MpcConfig,
                       robot: RobotParams) -> GrfCommand:
    """One-shot cold solve of the horizon problem; see StanceForceOptimizer."""
    return StanceForceOptimizer(config, robot).solve(
        state, foot_positions, contacts, desired_velocity)


def forces_to_torques(forces: np.ndarray, joint_angles: np.ndarray,
                      euler_zyx: np.ndarray, robot: RobotParams,
                      stance: np.ndarray | None = None):
    """Joint torques transmitting given foot forces, via Jacobian transpose.

    forces: (4, 3) world-frame forces each foot applies to the environment
    (the negated ground reaction). Per stance leg tau = J(q)' R' f; swing
    rows give zero. Returns (torques (4, 3), clip_events) with torques
    clipped to the per-joint limit.
    """
    from gaitforge import engine

    forces = np.asarray(forces, dtype=np.float64)
    joint_angles = np.asarray(joint_angles, dtype=np.float64)
    if forces.shape != (4, 3) or joint_angles.shape != (4, 3):
        raise ValueError("forces and joint_angles must be (4, 3)")
    if stance is None:
        stance = np.ones(4, dtype=bool)
    R = euler_zyx_to_matrix(np.asarray(euler_zyx, dtype=np.float64))
    tau = np.zeros((4, 3))
    clip_events = 0
    J = np.empty((3, 3))
    for leg in range(4):
        if not stance[leg]:
            continue
        engine.leg_jac(joint_angles[leg], robot.side_sign[leg],
                       robot.link_lengths, J)
        t = J.T @ (R.T @ forces[leg])
        over = np.abs(t) > robot.torque_limit
        clip_events += int(over.sum())
        tau[leg] = np.clip(t, -robot.torque_limit, robot.torque_limit)
    return tau, clip_events
