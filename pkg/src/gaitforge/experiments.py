"""Experiment drivers: hand-tuned baseline gaits, constant-speed cost
sweeps, accelerating-profile traces, and gait-regime classification.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from gaitforge.gait import GaitParams
from gaitforge.policy import policy_forward
from gaitforge.sim import EnvConfig, LocomotionEnv, TRACE_COLUMNS

PI = np.pi


@dataclass(frozen=True)
class BaselineGait:
    name: str
    frequency_hz: float
    swing_ratio: float
    phase_offsets: tuple

    def params(self) -> GaitParams:
        return GaitParams(self.frequency_hz, self.swing_ratio,
                          self.phase_offsets)


# Hand-tuned reference gaits. Offsets are (FL, RR, RL) relative to FR.
BASELINE_GAITS = {
    "walk": BaselineGait("Walk", 2.0, 0.3, (PI, 1.5 * PI, 0.5 * PI)),
    "slow_trot": BaselineGait("Slow Trot", 2.0, 0.5, (PI, PI, 0.0)),
    "rapid_trot": BaselineGait("Rapid Trot", 4.0, 0.5, (PI, PI, 0.0)),
    "fly_trot": BaselineGait("Fly Trot", 4.0, 0.6, (PI, PI, 0.0)),
}

# canonical offset templates for classification
GAIT_TEMPLATES = {
    "trot": np.array([PI, PI, 0.0]),
    "pace": np.array([PI, 0.0, PI]),
    "bound": np.array([0.0, PI, PI]),
    "walk": np.array([PI, 1.5 * PI, 0.5 * PI]),
    "reverse_walk": np.array([PI, 0.5 * PI, 1.5 * PI]),
    "pronk": np.array([0.0, 0.0, 0.0]),
}


def _wrapped_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max componentwise angular distance on the circle."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % (2 * PI)
    d = np.minimum(d, 2 * PI - d)
    return float(d.max())


def classify_offsets(offsets, tolerance: float = 0.35) -> str:
    """Nearest canonical template within tolerance, else 'other'."""
    offsets = np.asarray(offsets, dtype=np.float64)
    best_name, best_d = "other", np.inf
    for name, tpl in GAIT_TEMPLATES.items():
        d = _wrapped_distance(offsets, tpl)
        if d < best_d:
            best_name, best_d = name, d
    return best_name if best_d <= tolerance else "other"


@dataclass(frozen=True)
class SpeedPoint:
    gait: str
    speed: float
    mean_speed: float | None
    cot: float | None
    speed_error: float | None
    fell: bool


def run_constant_speed(env: LocomotionEnv, gait: GaitParams, speed: float,
                       seed: int, hold_s: float = 5.0) -> SpeedPoint:
    """Ramp to `speed`, hold, and measure steady-state cost of transport.

    The measurement window is the last half of the hold phase, excluding
    ramp transients. CoT = window energy / (m g window distance);
    mean_speed is window distance over window duration (the bias metric);
    speed_error is the mean per-sample relative tracking error, which also
    counts within-stride oscillation.
    """
    base_cfg = env.config
    ramp_s = speed / base_cfg.accel
    total_s = ramp_s + hold_s
    steps = int(np.ceil(total_s / base_cfg.highlevel_dt))
    cfg = replace(base_cfg, v_max=speed, episode_steps=steps)
    run_env = LocomotionEnv(env.robot, env.mpc_config, cfg, env.pd_gains,
                            env.z_clearance, record=True, arch=env.arch)
    summary = run_env.run_fixed_gait_episode(gait, seed, steps)
    name = getattr(gait, "name", "")
    if summary["fell"] or summary["steps"] < steps:
        return SpeedPoint(name, speed, None, None, None, True)
    return _window_point(name, speed, run_env, ramp_s, hold_s)


def _window_point(name: str, speed: float, run_env: LocomotionEnv,
                  ramp_s: float, hold_s: float) -> SpeedPoint:
    """Steady-state metrics over the last half of the hold phase."""
    cfg = run_env.config
    tr = run_env.trace()
    t = tr[:, TRACE_COLUMNS.index("time_s")]
    window = t >= (ramp_s + 0.5 * hold_s)
    if not np.any(window):
        return SpeedPoint(name, speed, None, None, None, True)
    w = tr[window]
    dt = cfg.lowlevel_dt
    energy = float(w[:, TRACE_COLUMNS.index("power_w")].sum() * dt)
    px = w[:, TRACE_COLUMNS.index("px")]
    distance = float(px[-1] - px[0])
    m, g = run_env.robot.mass, run_env.robot.gravity
    cot = energy / (m * g * max(abs(distance), 1e-6))
    mean_speed = distance / (dt * max(w.shape[0] - 1, 1))
    vx = w[:, TRACE_COLUMNS.index("vx")]
    vbar = w[:, TRACE_COLUMNS.index("desired_speed")]
    err = float(np.mean(np.abs(vbar - vx) / np.maximum(vbar, cfg.v_eps)))
    return SpeedPoint(name, speed, mean_speed, cot, err, False)


def baseline_sweep(env: LocomotionEnv, gait_keys, speeds, seed: int,
                   hold_s: float = 5.0):
    """SpeedPoints for each (baseline gait, speed) pair."""
    points = []
    for key in gait_keys:
        spec_gait = BASELINE_GAITS[key]
        for speed in speeds:
            pt = run_constant_speed(env, spec_gait.params(), speed, seed,
                                    hold_s)
            points.append(replace(pt, gait=spec_gait.name))
    return points


def policy_speed_sweep(env: LocomotionEnv, params: np.ndarray, speeds,
                       seed: int, hold_s: float = 5.0):
    """Constant-speed CoT of a learned policy (for baseline overlays)."""
    points = []
    base_cfg = env.config
    for speed in speeds:
        ramp_s = speed / base_cfg.accel
        steps = int(np.ceil((ramp_s + hold_s) / base_cfg.highlevel_dt))
        cfg = replace(base_cfg, v_max=speed, episode_steps=steps)
        run_env = LocomotionEnv(env.robot, env.mpc_config, cfg, env.pd_gains,
                                env.z_clearance, record=True, arch=env.arch)
        state = run_env.reset(seed)
        fell = False
        for _ in range(steps):
            gait = policy_forward(params, state.observation(cfg),
                                  run_env.arch)
            state, res = run_env.step(gait)
            if res.terminated:
                fell = True
                break
        if fell:
            points.append(SpeedPoint("Learned", speed, None, None, None,
                                     True))
            continue
        points.append(_window_point("Learned", speed, run_env, ramp_s,
                                    hold_s))
    return points


def ramp_trace(env: LocomotionEnv, params: np.ndarray, seed: int,
               duration_s: float | None = None) -> np.ndarray:
    """Per-substep trace of the policy under the accelerating profile."""
    cfg = env.config
    if duration_s is not None:
        if duration_s <= 0:
            return np.zeros((0, len(TRACE_COLUMNS)))
        steps = int(np.ceil(duration_s / cfg.highlevel_dt))
        cfg = replace(cfg, episode_steps=max(steps, 1))
    run_env = LocomotionEnv(env.robot, env.mpc_config, cfg, env.pd_gains,
                            env.z_clearance, record=True, arch=env.arch)
    state = run_env.reset(seed)
    for _ in range(cfg.episode_steps):
        gait = policy_forward(params, state.observation(cfg), run_env.arch)
        state, res = run_env.step(gait)
        if res.terminated:
            break
    return run_env.trace()


@dataclass(frozen=True)
class GaitRegime:
    start_time: float
    end_time: float
    start_speed: float
    end_speed: float
    label: str
    mean_offsets: tuple
    mean_swing_ratio: float
    mean_frequency: float


def detect_regimes(trace: np.ndarray, bin_s: float = 0.5,
                   tolerance: float = 0.35,
                   min_dwell_bins: int = 2) -> list[GaitRegime]:
    """Segment a ramp trace into gait regimes.

    The trace is bucketed in time; each bucket's median phase offsets form a
    point on the 3-torus. A new regime starts when a bucket moves more than
    2*tolerance away from the running segment centroid. Short segments
    (fewer than min_dwell_bins buckets) are treated as transitions and
    dropped. Labels come from the canonical templates within `tolerance`.
    """
    if trace.shape[0] == 0:
        return []
    it = TRACE_COLUMNS.index("time_s")
    iv = TRACE_COLUMNS.index("vx")
    i2 = TRACE_COLUMNS.index("theta2")
    isw = TRACE_COLUMNS.index("swing_ratio")
    ifr = TRACE_COLUMNS.index("frequency_hz")
    t = trace[:, it]
    bins = np.floor((t - t[0]) / bin_s).astype(int)
    buckets = []
    for b in range(bins.max() + 1):
        rows = trace[bins == b]
        if rows.shape[0] == 0:
            continue
        buckets.append({
            "t0": float(rows[0, it]),
            "t1": float(rows[-1, it]),
            "v0": float(rows[0, iv]),
            "v1": float(rows[-1, iv]),
            "off": np.median(rows[:, i2:i2 + 3], axis=0),
            "swing": float(np.median(rows[:, isw])),
            "freq": float(np.median(rows[:, ifr])),
        })
    segments = []
    current = None
    for bk in buckets:
        if current is None:
            current = {"buckets": [bk], "centroid": bk["off"].copy()}
            continue
        if _wrapped_distance(current["centroid"], bk["off"]) > 2 * tolerance:
            segments.append(current)
            current = {"buckets": [bk], "centroid": bk["off"].copy()}
        else:
            current["buckets"].append(bk)
            pts = np.array([x["off"] for x in current["buckets"]])
            current["centroid"] = np.median(pts, axis=0)
    if current is not None:
        segments.append(current)
    regimes = []
    for seg in segments:
        if len(seg["buckets"]) < min_dwell_bins:
            continue
        bks = seg["buckets"]
        off = seg["centroid"]
        regimes.append(GaitRegime(
            start_time=bks[0]["t0"], end_time=bks[-1]["t1"],
            start_speed=bks[0]["v0"], end_speed=bks[-1]["v1"],
            label=classify_offsets(off, tolerance),
            mean_offsets=tuple(float(x) for x in off),
            mean_swing_ratio=float(np.mean([x["swing"] for x in bks])),
            mean_frequency=float(np.mean([x["freq"] for x in bks])),
        ))
    # merge adjacent regimes that re-converged to the same place
    merged: list[GaitRegime] = []
    for reg in regimes:
        if merged and (_wrapped_distance(merged[-1].mean_offsets,
                                         reg.mean_offsets) <= tolerance):
            prev = merged.pop()
            n1 = prev.end_time - prev.start_time
            n2 = reg.end_time - reg.start_time
            wsum = max(n1 + n2, 1e-9)
            merged.append(GaitRegime(
                start_time=prev.start_time, end_time=reg.end_time,
                start_speed=prev.start_speed, end_speed=reg.end_speed,
                label=prev.label,
                mean_offsets=prev.mean_offsets,
                mean_swing_ratio=(prev.mean_swing_ratio * n1
                                  + reg.mean_swing_ratio * n2) / wsum,
                mean_frequency=(prev.mean_frequency * n1
                                + reg.mean_frequency * n2) / wsum,
            ))
        else:
            merged.append(reg)
    return merged


def top_speed_swing_ratio(trace: np.ndarray, speed_fraction: float = 0.9
                          ) -> float:
    """Mean commanded swing ratio where desired speed >= fraction of max."""
    if trace.shape[0] == 0:
        return float("nan")
    ivb = TRACE_COLUMNS.index("desired_speed")
    isw = TRACE_COLUMNS.index("swing_ratio")
    vbar = trace[:, ivb]
    mask = vbar >= speed_fraction * vbar.max()
    return float(trace[mask, isw].mean())
