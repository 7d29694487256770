"""Purpose-built quadruped simulator and its MDP wrapper.

The plant matches the model family the controller assumes: a single rigid
body driven by stance-foot forces (nonlinear rotation, no small-angle
shortcuts), stance feet kinematically pinned to the ground (no slip), and
massless swing legs integrated per joint. That choice makes the closed loop
verifiable: controller model error comes only from linearization, not from
unmodeled contact.

The 20 Hz step applies one set of gait parameters, runs 25 substeps of
control (phase advance, contact schedule, force QP, swing PD) plus physics
at 500 Hz, and returns the speed-tracking/energy reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaitforge import engine
from gaitforge.gait import GaitParams, GaitState, contact_schedule
from gaitforge.geometry import euler_zyx_to_matrix
from gaitforge.mpc import CentroidalState, GrfCommand, MpcConfig
from gaitforge.robot import RobotParams
from gaitforge.swing import PdGains
from gaitforge.policy import DEFAULT_ARCH, PolicyArch, policy_forward

TRACE_COLUMNS = (
    "time_s", "desired_speed", "vx", "vy", "vz", "px", "py", "pz",
    "roll", "pitch", "yaw",
    "phase_fr", "phase_fl", "phase_rr", "phase_rl",
    "stance_fr", "stance_fl", "stance_rr", "stance_rl",
    "power_w", "frequency_hz", "swing_ratio", "theta2", "theta3", "theta4",
    "fz_total", "qp_iterations", "qp_fallback",
)
assert len(TRACE_COLUMNS) == engine.TRACE_WIDTH


class NumericalBlowup(RuntimeError):
    """A state component left the sane range; episode is a failure."""


@dataclass(frozen=True)
class EnvConfig:
    episode_steps: int = 400
    highlevel_dt: float = 0.05
    lowlevel_dt: float = 0.002
    accel: float = 1.0
    v_max: float = 2.5
    reward_bonus: float = 3.0
    w_speed: float = 1.0
    w_energy: float = 0.37
    v_eps: float = 0.1
    min_height: float = 0.15
    max_tilt: float = 0.5
    seed: int = 0
    reset_noise_height: float = 0.002
    reset_noise_velocity: float = 0.01
    reset_noise_omega: float = 0.01

    def __post_init__(self):
        ratio = self.highlevel_dt / self.lowlevel_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(
                "highlevel_dt must be an integer multiple of lowlevel_dt")
        if self.episode_steps < 1:
            raise ValueError("episode_steps must be >= 1")
        if self.accel <= 0 or self.v_max < 0:
            raise ValueError("accel must be positive and v_max nonnegative")
        if self.v_eps <= 0:
            raise ValueError("v_eps must be positive")

    @property
    def substeps(self) -> int:
        return int(round(self.highlevel_dt / self.lowlevel_dt))


@dataclass(frozen=True)
class SimState:
    """Snapshot of the full simulator state at a 20 Hz step boundary."""

    base: CentroidalState
    joint_angles: np.ndarray        # (4, 3)
    joint_velocities: np.ndarray    # (4, 3)
    gait: GaitState
    time_s: float
    last_gait_params: GaitParams
    cumulative_energy_j: float

    def observation(self, config: EnvConfig) -> np.ndarray:
        return np.array([desired_speed(self.time_s, config),
                         self.base.linear_velocity[0]])


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    power_w: float
    terminated: bool
    info: dict = field(default_factory=dict)


def desired_speed(t: float, config: EnvConfig) -> float:
    """Commanded forward speed: linear ramp at `accel`, capped at `v_max`."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return min(config.accel * t, config.v_max)


def motor_power(tau, omega, alpha: float = 0.3):
    """Electrical power of one motor: max(tau*omega + alpha*tau^2, 0).

    The tau^2 term is winding heat; with resistance-over-torque-constant
    ratio 25 and gear reduction 9.1 the coefficient is 25/9.1^2 = 0.3019,
    rounded to 0.3. No regenerative braking: clamped below at zero.
    """
    tau = np.asarray(tau, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    return np.maximum(tau * omega + alpha * tau * tau, 0.0)


def step_reward(desired: float, measured: float, torques, joint_rates,
                config: EnvConfig, mass: float = 15.0,
                gravity: float = 9.8) -> float:
    """Survival bonus minus squared relative speed error minus weighted
    instantaneous cost of transport. The commanded speed is floored at
    v_eps inside both denominators only."""
    denom = max(desired, config.v_eps)
    err = (desired - measured) / denom
    power = float(np.sum(motor_power(torques, joint_rates)))
    cot = power / (mass * gravity * denom)
    return config.reward_bonus - config.w_speed * err * err - config.w_energy * cot


def _make_engine_cfg(robot: RobotParams, mpc: MpcConfig, env: EnvConfig,
                     gains: PdGains, z_clearance: float) -> engine.EngineCfg:
    return engine.EngineCfg(
        hip=np.ascontiguousarray(robot.hip_offsets),
        side=np.ascontiguousarray(robot.side_sign),
        links=np.ascontiguousarray(robot.link_lengths),
        mass=float(robot.mass),
        gravity=float(robot.gravity),
        inertia=np.ascontiguousarray(robot.base_inertia),
        motor_alpha=float(robot.motor_alpha),
        tau_limit=float(robot.torque_limit),
        joint_inertia=float(robot.joint_inertia),
        joint_friction=float(robot.joint_friction),
        horizon=int(mpc.horizon_steps),
        dt_mpc=float(mpc.dt_mpc),
        q_diag=np.ascontiguousarray(mpc.state_weights),
        r_force=float(mpc.force_weight),
        mu=float(mpc.friction_mu),
        fz_min=float(mpc.fz_min),
        fz_max=float(mpc.fz_max),
        qp_tol=float(mpc.qp_tolerance),
        qp_max_iter=int(mpc.qp_max_iterations),
        qp_reg=float(mpc.qp_regularization),
        fallback_max=int(mpc.fallback_steps),
        kp=np.ascontiguousarray(gains.kp),
        kd=np.ascontiguousarray(gains.kd),
        z_clearance=float(z_clearance),
        stand_height=float(robot.standing_height),
        dt_low=float(env.lowlevel_dt),
        n_substeps=int(env.substeps),
        accel=float(env.accel),
        v_max=float(env.v_max),
        reward_bonus=float(env.reward_bonus),
        w_speed=float(env.w_speed),
        w_energy=float(env.w_energy),
        v_eps=float(env.v_eps),
        min_height=float(env.min_height),
        max_tilt=float(env.max_tilt),
        blowup=1e6,
    )


def _blank_engine_state(horizon: int) -> engine.EngineState:
    return engine.EngineState(
        pos=np.zeros(3), vel=np.zeros(3), eul=np.zeros(3), omg=np.zeros(3),
        q=np.zeros((4, 3)), dq=np.zeros((4, 3)),
        phase=np.zeros(1),
        pin_on=np.zeros(4, dtype=np.bool_), pins=np.zeros((4, 3)),
        lift=np.zeros((4, 3)), prev_stance=np.zeros(4, dtype=np.bool_),
        time=np.zeros(1), energy=np.zeros(1),
        last_grf=np.zeros((4, 3)), fallback=np.zeros(1, dtype=np.int64),
        counters=np.zeros(4, dtype=np.int64),
        warm_u=np.zeros(12 * horizon), warm_lam=np.zeros(24 * horizon),
        warm_s=np.zeros(24 * horizon),
        warm_n=np.full(1, -1, dtype=np.int64),
        warm_pattern=np.zeros(4 * horizon, dtype=np.bool_),
    )


class LocomotionEnv:
    """One environment instance: owns plant state and controller workspaces."""

    def __init__(self, robot: RobotParams | None = None,
                 mpc_config: MpcConfig | None = None,
                 env_config: EnvConfig | None = None,
                 pd_gains: PdGains | None = None,
                 z_clearance: float = 0.03,
                 record: bool = False,
                 arch: PolicyArch | None = None):
        self.robot = robot or RobotParams()
        self.mpc_config = mpc_config or MpcConfig()
        self.config = env_config or EnvConfig()
        self.pd_gains = pd_gains or PdGains()
        self.z_clearance = z_clearance
        self.record = record
        self.arch = arch or DEFAULT_ARCH
        self._cfg = _make_engine_cfg(self.robot, self.mpc_config,
                                     self.config, self.pd_gains, z_clearance)
        self._es = _blank_engine_state(self.mpc_config.horizon_steps)
        self._trace_step = np.zeros((self.config.substeps,
                                     engine.TRACE_WIDTH))
        self._out = np.zeros(engine.OUT_WIDTH)
        self._trace_all: list[np.ndarray] = []
        self._last_gait = GaitParams()
        self.step_count = 0
        self.status = engine.STATUS_RUNNING

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: int | None = None) -> SimState:
        """Reinitialize to a perturbed standing pose; returns the state.

        All feet start pinned at their current positions; the master phase
        starts at zero. The perturbation (height, linear and angular
        velocity) is drawn from the given seed, making episodes fully
        reproducible.
        """
        rng = np.random.default_rng(self.config.seed if seed is None
                                    else seed)
        es = self._es
        es.pos[:] = (0.0, 0.0, self.robot.standing_height)
        es.pos[2] += rng.normal(0.0, self.config.reset_noise_height)
        es.vel[:] = rng.normal(0.0, self.config.reset_noise_velocity, 3)
        es.eul[:] = 0.0
        es.omg[:] = rng.normal(0.0, self.config.reset_noise_omega, 3)
        nominal = self.robot.nominal_foot_positions()
        qn = np.empty(3)
        for leg in range(4):
            target = nominal[leg] - self.robot.hip_offsets[leg]
            if not engine.leg_ik(target, self.robot.side_sign[leg],
                                 self.robot.link_lengths, qn):
                raise ValueError("nominal stance is outside the workspace")
            es.q[leg] = qn
            es.dq[leg] = 0.0
            foot_b = np.empty(3)
            engine.leg_fk(qn, self.robot.side_sign[leg],
                          self.robot.link_lengths, foot_b)
            es.pins[leg] = es.pos + self.robot.hip_offsets[leg] + foot_b
            es.pin_on[leg] = True
            es.prev_stance[leg] = True
        es.phase[0] = 0.0
        es.time[0] = 0.0
        es.energy[0] = 0.0
        es.last_grf[:] = 0.0
        es.fallback[0] = 0
        es.counters[:] = 0
        es.warm_n[0] = -1
        self._trace_all.clear()
        self._last_gait = GaitParams()
        self.step_count = 0
        self.status = engine.STATUS_RUNNING
        return self.state()

    def state(self) -> SimState:
        es = self._es
        return SimState(
            base=CentroidalState(es.eul.copy(), es.pos.copy(),
                                 es.omg.copy(), es.vel.copy()),
            joint_angles=es.q.copy(),
            joint_velocities=es.dq.copy(),
            gait=GaitState(float(es.phase[0])),
            time_s=float(es.time[0]),
            last_gait_params=self._last_gait,
            cumulative_energy_j=float(es.energy[0]),
        )

    # -- stepping ----------------------------------------------------------

    def step(self, gait: GaitParams) -> tuple[SimState, StepResult]:
        """Apply one 20 Hz action. Gait parameters are validated by type."""
        if self.status != engine.STATUS_RUNNING:
            raise RuntimeError("episode over; call reset()")
        if not isinstance(gait, GaitParams):
            gait = GaitParams(*gait)
        self._trace_step[:] = 0.0
        status = engine.run_env_step(self._es, self._cfg, gait.as_array(),
                                     self._trace_step, self._out)
        self.status = status
        self.step_count += 1
        self._last_gait = gait
        out = self._out
        done = int(out[engine.OUT_SUBSTEPS])
        if self.record and done > 0:
            self._trace_all.append(self._trace_step[:done].copy())
        state = self.state()
        terminated = status != engine.STATUS_RUNNING
        result = StepResult(
            observation=state.observation(self.config),
            reward=float(out[engine.OUT_REWARD]),
            power_w=float(out[engine.OUT_MEAN_POWER]),
            terminated=terminated,
            info={
                "speed_error": float(out[engine.OUT_SPEED_ERR]),
                "cot_instant": float(out[engine.OUT_COT]),
                "clip_events": int(out[engine.OUT_CLIPS]),
                "clamp_events": int(out[engine.OUT_CLAMPS]),
                "slip_events": int(out[engine.OUT_SLIPS]),
                "qp_failures": int(out[engine.OUT_QP_FAILS]),
                "energy_j": float(out[engine.OUT_ENERGY]),
                "substeps": done,
                "failure": status == engine.STATUS_FAILURE,
                "desired_speed": float(out[engine.OUT_VBAR]),
                "measured_speed": float(out[engine.OUT_V]),
            },
        )
        return state, result

    def trace(self) -> np.ndarray:
        """(n_substeps_total, len(TRACE_COLUMNS)) recorded rows."""
        if not self._trace_all:
            return np.zeros((0, engine.TRACE_WIDTH))
        return np.vstack(self._trace_all)

    # -- rollout helpers ---------------------------------------------------

    def run_policy_episode(self, params: np.ndarray, seed: int,
                           max_steps: int | None = None):
        """Roll one episode under a policy; returns aggregate metrics.

        Return value: dict with return, steps, distance, energy, cot,
        mean_speed_error, fell, failure.
        """
        state = self.reset(seed)
        steps = max_steps or self.config.episode_steps
        total = 0.0
        err_sum = 0.0
        start_x = float(self._es.pos[0])
        n = 0
        fell = False
        failure = False
        for _ in range(steps):
            gait = policy_forward(params, state.observation(self.config),
                                  self.arch)
            state, res = self.step(gait)
            total += res.reward
            err_sum += res.info["speed_error"]
            n += 1
            if res.terminated:
                fell = True
                failure = res.info["failure"]
                break
        distance = float(self._es.pos[0]) - start_x
        energy = float(self._es.energy[0])
        mgd = self.robot.mass * self.robot.gravity * max(abs(distance), 1e-6)
        return {
            "return": total,
            "steps": n,
            "distance": distance,
            "energy_j": energy,
            "cot": energy / mgd,
            "mean_speed_error": err_sum / max(n, 1),
            "fell": fell,
            "failure": failure,
        }

    def run_fixed_gait_episode(self, gait: GaitParams, seed: int,
                               steps: int | None = None):
        """Roll an episode holding fixed gait parameters."""
        self.reset(seed)
        steps = steps or self.config.episode_steps
        total = 0.0
        err_sum = 0.0
        start_x = float(self._es.pos[0])
        n = 0
        fell = False
        failure = False
        for _ in range(steps):
            _, res = self.step(gait)
            total += res.reward
            err_sum += res.info["speed_error"]
            n += 1
            if res.terminated:
                fell = True
                failure = res.info["failure"]
                break
        distance = float(self._es.pos[0]) - start_x
        energy = float(self._es.energy[0])
        mgd = self.robot.mass * self.robot.gravity * max(abs(distance), 1e-6)
        return {
            "return": total,
            "steps": n,
            "distance": distance,
            "energy_j": energy,
            "cot": energy / mgd,
            "mean_speed_error": err_sum / max(n, 1),
            "fell": fell,
            "failure": failure,
        }


def physics_substep(state: SimState, swing_torques: np.ndarray,
                    grf: GrfCommand, dt: float,
                    robot: RobotParams | None = None,
                    env_config: EnvConfig | None = None) -> SimState:
    """Advance the plant alone by one low-level step (pure function).

    Stance membership comes from the state's gait phase and gait parameters;
    stance feet are pinned at their instantaneous forward-kinematics
    positions, swing legs integrate under `swing_torques`. Exists for
    property tests and composition; the environment loop runs the same
    compiled kernel without the conversion overhead.
    """
    robot = robot or RobotParams()
    env_config = env_config or EnvConfig()
    mpc_cfg = MpcConfig()
    cfg = _make_engine_cfg(robot, mpc_cfg, env_config, PdGains(), 0.05)
    es = _blank_engine_state(mpc_cfg.horizon_steps)
    es.pos[:] = state.base.position
    es.vel[:] = state.base.linear_velocity
    es.eul[:] = state.base.euler_zyx
    es.omg[:] = state.base.angular_velocity
    es.q[:] = state.joint_angles
    es.dq[:] = state.joint_velocities
    es.phase[0] = state.gait.phase_leg1
    es.time[0] = state.time_s
    es.energy[0] = state.cumulative_energy_j
    schedule = contact_schedule(state.gait, state.last_gait_params)
    R = euler_zyx_to_matrix(state.base.euler_zyx)
    foot_b = np.empty(3)
    for leg in range(4):
        on = schedule.in_stance[leg]
        es.pin_on[leg] = on
        es.prev_stance[leg] = on
        if on:
            engine.leg_fk(state.joint_angles[leg], robot.side_sign[leg],
                          robot.link_lengths, foot_b)
            es.pins[leg] = state.base.position + R @ (
                robot.hip_offsets[leg] + foot_b)
    out = np.zeros(3)
    ok = engine.physics_substep(es, cfg, np.asarray(grf.forces, np.float64),
                                np.asarray(swing_torques, np.float64),
                                float(dt), out)
    if not ok:
        raise NumericalBlowup("state exceeded sane bounds in substep")
    return SimState(
        base=CentroidalState(es.eul.copy(), es.pos.copy(), es.omg.copy(),
                             es.vel.copy()),
        joint_angles=es.q.copy(),
        joint_velocities=es.dq.copy(),
        gait=state.gait,
        time_s=state.time_s + dt,
        last_gait_params=state.last_gait_params,
        cumulative_energy_j=state.cumulative_energy_j + float(out[0]) * dt,
    )
