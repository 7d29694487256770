import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitforge.gait import GaitParams
from gaitforge.policy import (
    DEFAULT_ARCH,
    DimensionMismatch,
    PolicyArch,
    load_checkpoint,
    policy_forward,
    raw_to_gait,
    save_checkpoint,
    zero_params,
)

PI = np.pi


def reference_forward(params, obs, arch):
    """Plain numpy mirror of the network: obs -> tanh hidden -> tanh out."""
    n_in, n_h, n_out = arch.n_obs, arch.n_hidden, arch.n_out
    i = 0
    w1 = params[i:i + n_in * n_h].reshape(n_h, n_in); i += n_in * n_h
    b1 = params[i:i + n_h]; i += n_h
    w2 = params[i:i + n_h * n_out].reshape(n_out, n_h); i += n_h * n_out
    b2 = params[i:i + n_out]; i += n_out
    assert i == params.size
    h = np.tanh(w1 @ obs + b1)
    return np.tanh(w2 @ h + b2)


def test_parameter_vector_length_matches_architecture():
    assert zero_params().size == 2 * 256 + 256 + 256 * 5 + 5 == 2053
    assert zero_params(PolicyArch(3, 8, 5)).size == 3 * 8 + 8 + 8 * 5 + 5


def test_zero_parameters_give_the_neutral_midpoint_gait():
    gait = policy_forward(zero_params(), np.array([1.0, 0.4]))
    assert gait.frequency_hz == 2.0
    assert gait.swing_ratio == 0.5
    assert gait.phase_offsets == (PI, PI, PI)


def test_raw_action_bounds_map_to_clamped_extremes():
    top = raw_to_gait(np.ones(5))
    assert top.frequency_hz == 4.0
    assert top.swing_ratio == 0.95
    assert top.phase_offsets == (2 * PI, 2 * PI, 2 * PI)
    bottom = raw_to_gait(-np.ones(5))
    assert bottom.frequency_hz == pytest.approx(0.2)
    assert bottom.swing_ratio == pytest.approx(0.05)
    assert bottom.phase_offsets == (0.0, 0.0, 0.0)


def test_raw_midpoint_maps_affinely():
    gait = raw_to_gait(np.array([0.25, -0.5, 0.5, -1.0, 0.0]))
    assert gait.frequency_hz == pytest.approx(2.5, abs=1e-15)
    assert gait.swing_ratio == pytest.approx(0.25, abs=1e-15)
    np.testing.assert_allclose(gait.phase_offsets,
                               (1.5 * PI, 0.0, PI), atol=1e-15)


def test_forward_matches_reference_network():
    arch = PolicyArch(2, 7, 5)
    rng = np.random.default_rng(0)
    for _ in range(25):
        params = rng.normal(scale=0.4, size=zero_params(arch).size)
        obs = rng.normal(scale=1.5, size=2)
        got = policy_forward(params, obs, arch)
        want = raw_to_gait(reference_forward(params, obs, arch))
        assert got.frequency_hz == pytest.approx(want.frequency_hz, abs=1e-12)
        assert got.swing_ratio == pytest.approx(want.swing_ratio, abs=1e-12)
        np.testing.assert_allclose(got.phase_offsets, want.phase_offsets,
                                   atol=1e-12)


def test_forward_is_deterministic_bitwise():
    rng = np.random.default_rng(4)
    params = rng.normal(scale=0.05, size=2053)
    obs = np.array([1.7, 0.9])
    a = policy_forward(params, obs)
    b = policy_forward(params, obs)
    assert a.as_array().tobytes() == b.as_array().tobytes()


def test_wrong_parameter_length_raises():
    with pytest.raises(DimensionMismatch):
        policy_forward(np.zeros(100), np.array([0.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        policy_forward(zero_params(), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.floats(-50.0, 50.0), st.floats(-50.0, 50.0), st.integers(0, 2**32 - 1))
def test_output_always_satisfies_gait_invariants(o1, o2, seed):
    arch = PolicyArch(2, 6, 5)
    rng = np.random.default_rng(seed)
    params = rng.normal(scale=2.0, size=zero_params(arch).size)
    gait = policy_forward(params, np.array([o1, o2]), arch)
    assert isinstance(gait, GaitParams)
    assert 0.2 <= gait.frequency_hz <= 4.0
    assert 0.05 <= gait.swing_ratio <= 0.95
    assert all(0.0 <= t <= 2 * PI for t in gait.phase_offsets)


def test_checkpoint_roundtrip_preserves_bits_and_metadata(tmp_path):
    rng = np.random.default_rng(8)
    params = rng.normal(scale=0.03, size=2053)
    path = tmp_path / "policy.ckpt"
    save_checkpoint(path, params, DEFAULT_ARCH, meta={"iteration": 17})
    loaded, arch, meta = load_checkpoint(path)
    assert loaded.tobytes() == params.tobytes()
    assert arch == DEFAULT_ARCH
    assert meta["iteration"] == 17


def test_checkpoint_rejects_mismatched_architecture(tmp_path):
    path = tmp_path / "tiny.ckpt"
    save_checkpoint(path, zero_params(PolicyArch(2, 4, 5)), PolicyArch(2, 4, 5))
    loaded, arch, _ = load_checkpoint(path)
    with pytest.raises(DimensionMismatch):
        policy_forward(loaded, np.zeros(2), DEFAULT_ARCH)
