"""Tests for the experiment toolkit: the fixed-gait baseline table, gait
classification from phase offsets, regime segmentation of ramp traces, and
constant-speed evaluation runs."""

from __future__ import annotations

import numpy as np
import pytest

from gaitforge.experiments import (
    BASELINE_GAITS,
    GAIT_TEMPLATES,
    TRACE_COLUMNS,
    baseline_sweep,
    classify_offsets,
    detect_regimes,
    ramp_trace,
    run_constant_speed,
    top_speed_swing_ratio,
)
from gaitforge.gait import GaitParams
from gaitforge.policy import zero_params
from gaitforge.sim import LocomotionEnv

PI = np.pi


# ---------------------------------------------------------------------------
# Baseline table and templates
# ---------------------------------------------------------------------------

def test_baseline_table_matches_the_published_parameters():
    expect = {
        "walk": ("Walk", 2.0, 0.3, (PI, 1.5 * PI, 0.5 * PI)),
        "slow_trot": ("Slow Trot", 2.0, 0.5, (PI, PI, 0.0)),
        "rapid_trot": ("Rapid Trot", 4.0, 0.5, (PI, PI, 0.0)),
        "fly_trot": ("Fly Trot", 4.0, 0.6, (PI, PI, 0.0)),
    }
    assert set(BASELINE_GAITS) == set(expect)
    for key, (name, freq, swing, offsets) in expect.items():
        gait = BASELINE_GAITS[key]
        assert gait.name == name
        assert gait.frequency_hz == freq
        assert gait.swing_ratio == swing
        np.testing.assert_allclose(gait.phase_offsets, offsets, atol=1e-12)


def test_gait_templates_cover_the_canonical_footfall_patterns():
    expect = {
        "trot": (PI, PI, 0.0),
        "pace": (PI, 0.0, PI),
        "bound": (0.0, PI, PI),
        "walk": (PI, 1.5 * PI, 0.5 * PI),
        "reverse_walk": (PI, 0.5 * PI, 1.5 * PI),
        "pronk": (0.0, 0.0, 0.0),
    }
    assert set(GAIT_TEMPLATES) == set(expect)
    for name, offsets in expect.items():
        np.testing.assert_allclose(GAIT_TEMPLATES[name], offsets, atol=1e-12)


def test_classify_offsets_labels_templates_and_neighbors():
    assert classify_offsets((PI, PI, 0.0)) == "trot"
    assert classify_offsets((PI, 1.5 * PI, 0.5 * PI)) == "walk"
    assert classify_offsets((PI, 0.5 * PI, 1.5 * PI)) == "reverse_walk"
    assert classify_offsets((PI, 0.0, PI)) == "pace"
    assert classify_offsets((0.0, 0.0, 0.0)) == "pronk"
    # Perturbations inside the tolerance ball keep their label.
    assert classify_offsets((PI + 0.2, PI - 0.1, 0.3)) == "trot"
    # Offsets wrap: 2*pi - 0.05 is next to zero.
    assert classify_offsets((PI, PI, 2 * PI - 0.05)) == "trot"
    # Far from every template.
    assert classify_offsets((1.0, 2.5, 4.5)) == "other"
    # Tightening the tolerance rejects a previously accepted neighbor.
    assert classify_offsets((PI + 0.2, PI - 0.1, 0.3), tolerance=0.1) == \
        "other"


# ---------------------------------------------------------------------------
# Regime segmentation (synthetic traces)
# ---------------------------------------------------------------------------

def synthetic_trace(segments, dt=0.01):
    """Rows of (time, desired, vx, ..., freq, swing, offsets) per segment.

    segments: list of (duration_s, offsets, swing, freq). Speed ramps
    linearly over the whole trace from 0 to 2.
    """
    total = sum(s[0] for s in segments)
    n = int(round(total / dt))
    trace = np.zeros((n, len(TRACE_COLUMNS)))
    t = dt * np.arange(1, n + 1)
    trace[:, TRACE_COLUMNS.index("time_s")] = t
    speed = 2.0 * t / total
    trace[:, TRACE_COLUMNS.index("desired_speed")] = speed
    trace[:, TRACE_COLUMNS.index("vx")] = speed
    i2 = TRACE_COLUMNS.index("theta2")
    row = 0
    for duration, offsets, swing, freq in segments:
        k = int(round(duration / dt))
        trace[row:row + k, i2:i2 + 3] = offsets
        trace[row:row + k, TRACE_COLUMNS.index("swing_ratio")] = swing
        trace[row:row + k, TRACE_COLUMNS.index("frequency_hz")] = freq
        row += k
    return trace


def test_detect_regimes_finds_a_clean_switch():
    trace = synthetic_trace([
        (4.0, (PI, 1.5 * PI, 0.5 * PI), 0.3, 2.0),
        (4.0, (PI, PI, 0.0), 0.55, 3.0),
    ])
    regimes = detect_regimes(trace, bin_s=0.5)
    assert [r.label for r in regimes] == ["walk", "trot"]
    walk, trot = regimes
    assert walk.start_time < 0.1 and abs(walk.end_time - 4.0) < 0.6
    assert abs(trot.start_time - 4.0) < 0.6 and trot.end_time > 7.9
    assert walk.mean_swing_ratio == pytest.approx(0.3, abs=1e-9)
    assert trot.mean_swing_ratio == pytest.approx(0.55, abs=1e-9)
    assert walk.mean_frequency == pytest.approx(2.0, abs=1e-9)
    assert trot.mean_frequency == pytest.approx(3.0, abs=1e-9)
    # Speeds at the segment edges follow the ramp.
    assert walk.start_speed < 0.1
    assert trot.end_speed == pytest.approx(2.0, abs=0.05)


def test_detect_regimes_drops_blips_and_merges_the_remainder():
    trace = synthetic_trace([
        (3.0, (PI, PI, 0.0), 0.5, 2.0),
        (0.5, (0.0, 0.0, 0.0), 0.5, 2.0),   # one-bucket transition blip
        (3.0, (PI, PI, 0.0), 0.5, 2.0),
    ])
    regimes = detect_regimes(trace, bin_s=0.5, min_dwell_bins=2)
    assert [r.label for r in regimes] == ["trot"]
    assert regimes[0].end_time - regimes[0].start_time > 5.5


def test_detect_regimes_handles_an_empty_trace():
    assert detect_regimes(np.zeros((0, len(TRACE_COLUMNS)))) == []


def test_top_speed_swing_ratio_averages_the_fastest_rows():
    trace = synthetic_trace([
        (4.0, (PI, PI, 0.0), 0.5, 2.0),
        (4.0, (PI, PI, 0.0), 0.68, 4.0),
    ])
    # The top tenth of the command ramp lies inside the second segment.
    assert top_speed_swing_ratio(trace, 0.9) == pytest.approx(0.68, abs=1e-9)
    assert np.isnan(top_speed_swing_ratio(np.zeros((0, 28))))


# ---------------------------------------------------------------------------
# Closed-loop evaluation runs
# ---------------------------------------------------------------------------

def test_run_constant_speed_tracks_a_slow_trot(jit_warm):
    env = LocomotionEnv()
    point = run_constant_speed(env, GaitParams(2.0, 0.5, (PI, PI, 0.0)),
                               0.6, seed=1, hold_s=2.0)
    assert point.fell is False
    assert abs(point.mean_speed - 0.6) / 0.6 < 0.15
    assert 0.3 < point.cot < 3.0
    assert point.speed_error < 0.15


def test_run_constant_speed_flags_a_fall(jit_warm):
    env = LocomotionEnv()
    point = run_constant_speed(env, GaitParams(2.0, 0.95, (0.0, 0.0, 0.0)),
                               0.5, seed=0, hold_s=1.0)
    assert point.fell is True
    assert point.mean_speed is None and point.cot is None


def test_baseline_sweep_reports_named_points(jit_warm):
    env = LocomotionEnv()
    points = baseline_sweep(env, ["slow_trot", "walk"], [0.5], seed=2,
                            hold_s=1.5)
    assert [p.gait for p in points] == ["Slow Trot", "Walk"]
    for point in points:
        assert point.speed == 0.5
        assert point.fell is False
        assert point.cot > 0.0


def test_ramp_trace_shape_and_degenerate_duration(jit_warm):
    env = LocomotionEnv()
    trace = ramp_trace(env, zero_params(), seed=0, duration_s=1.0)
    assert trace.ndim == 2 and trace.shape[1] == len(TRACE_COLUMNS)
    assert trace.shape[0] > 0
    empty = ramp_trace(env, zero_params(), seed=0, duration_s=0.0)
    assert empty.shape == (0, len(TRACE_COLUMNS))
