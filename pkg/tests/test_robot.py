import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitforge.robot import (
    OutOfReachError,
    RobotParams,
    foot_jacobian,
    forward_kinematics,
    inverse_kinematics,
)
from oracles import fd_jacobian

ROBOT = RobotParams()
L_AB, L_THIGH, L_CALF = ROBOT.link_lengths


def transform_chain_fk(params, leg, q):
    """Independent forward kinematics via homogeneous transforms.

    Chain per leg, hip-relative: roll about x by the abduction angle, offset
    sideways by the abduction link, pitch about y by the hip angle for the
    thigh, pitch again by the knee angle for the calf. Zero configuration
    points the leg straight down.
    """

    def trans(v):
        T = np.eye(4)
        T[:3, 3] = v
        return T

    def rot(axis, a):
        T = np.eye(4)
        c, s = np.cos(a), np.sin(a)
        if axis == "x":
            T[:3, :3] = [[1, 0, 0], [0, c, -s], [0, s, c]]
        else:
            T[:3, :3] = [[c, 0, s], [0, 1, 0], [-s, 0, c]]
        return T

    l_ab, l_th, l_cf = params.link_lengths
    side = params.side_sign[leg]
    T = rot("x", q[0]) @ trans([0.0, side * l_ab, 0.0])
    T = T @ rot("y", q[1]) @ trans([0.0, 0.0, -l_th])
    T = T @ rot("y", q[2]) @ trans([0.0, 0.0, -l_cf])
    return T[:3, 3]


def sample_reachable_targets(rng, leg, n):
    """Joint samples on the knee-backward branch mapped through FK."""
    qs = np.stack([
        rng.uniform(-0.8, 0.8, size=n),
        rng.uniform(-1.2, 1.2, size=n),
        rng.uniform(-2.4, -0.15, size=n),
    ], axis=1)
    return [forward_kinematics(ROBOT, leg, q) for q in qs]


# ---- forward kinematics -----------------------------------------------------

def test_zero_configuration_hangs_foot_straight_below_hip():
    for leg in range(4):
        p = forward_kinematics(ROBOT, leg, np.zeros(3))
        expected = np.array([0.0, ROBOT.side_sign[leg] * L_AB,
                             -(L_THIGH + L_CALF)])
        np.testing.assert_allclose(p, expected, atol=1e-14)


def test_nominal_feet_sit_below_hips_at_standing_height():
    feet = ROBOT.nominal_foot_positions()
    np.testing.assert_allclose(feet[:, :2], ROBOT.hip_offsets[:, :2], atol=0)
    np.testing.assert_allclose(feet[:, 2], -ROBOT.standing_height, atol=0)


def test_right_angle_knee_shortens_vertical_reach():
    q = np.array([0.0, 0.0, -np.pi / 2])
    p = forward_kinematics(ROBOT, 0, q)
    assert p[2] == pytest.approx(-(L_THIGH + L_CALF * np.cos(np.pi / 2)),
                                 abs=1e-12)
    assert p[2] == pytest.approx(-L_THIGH, abs=1e-12)


def test_fk_matches_independent_transform_chain():
    rng = np.random.default_rng(7)
    for _ in range(200):
        leg = int(rng.integers(4))
        q = rng.uniform([-0.8, -1.5, -2.6], [0.8, 1.5, 0.0])
        np.testing.assert_allclose(
            forward_kinematics(ROBOT, leg, q),
            transform_chain_fk(ROBOT, leg, q), atol=1e-12)


def test_fk_handles_nonzero_abduction_link():
    wide = RobotParams(link_lengths=(0.08, 0.2, 0.2))
    rng = np.random.default_rng(9)
    for _ in range(100):
        leg = int(rng.integers(4))
        q = rng.uniform([-0.8, -1.5, -2.6], [0.8, 1.5, 0.0])
        np.testing.assert_allclose(
            forward_kinematics(wide, leg, q),
            transform_chain_fk(wide, leg, q), atol=1e-12)


# ---- inverse kinematics -----------------------------------------------------

def test_straight_leg_at_full_reach_recovers_zero_knee():
    for leg in range(4):
        target = np.array([0.0, ROBOT.side_sign[leg] * L_AB,
                           -(L_THIGH + L_CALF)])
        q = inverse_kinematics(ROBOT, leg, target)
        assert abs(q[2]) < 1e-6
        np.testing.assert_allclose(
            forward_kinematics(ROBOT, leg, q), target, atol=1e-9)


def test_roundtrip_error_stays_below_nanometer_scale():
    rng = np.random.default_rng(3)
    worst = 0.0
    for leg in range(4):
        for p in sample_reachable_targets(rng, leg, 250):
            q = inverse_kinematics(ROBOT, leg, p)
            worst = max(worst, float(np.max(np.abs(
                forward_kinematics(ROBOT, leg, q) - p))))
    assert worst < 1e-9


def test_ik_stays_on_the_knee_backward_branch():
    rng = np.random.default_rng(11)
    for leg in range(4):
        for p in sample_reachable_targets(rng, leg, 50):
            q = inverse_kinematics(ROBOT, leg, p)
            assert -np.pi - 1e-9 <= q[2] <= 1e-9


def test_target_beyond_leg_length_raises():
    target = np.array([0.0, 0.0, -1.01 * (L_THIGH + L_CALF)])
    with pytest.raises(OutOfReachError):
        inverse_kinematics(ROBOT, 0, target)


def test_target_inside_minimum_annulus_raises():
    stubby = RobotParams(link_lengths=(0.0, 0.25, 0.15))
    target = np.array([0.0, 0.0, -0.5 * (0.25 - 0.15)])
    with pytest.raises(OutOfReachError):
        inverse_kinematics(stubby, 1, target)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3),
       st.floats(-0.7, 0.7), st.floats(-1.2, 1.2), st.floats(-2.3, -0.2))
def test_roundtrip_property_over_joint_space(leg, q0, q1, q2):
    p = forward_kinematics(ROBOT, leg, np.array([q0, q1, q2]))
    q = inverse_kinematics(ROBOT, leg, p)
    np.testing.assert_allclose(forward_kinematics(ROBOT, leg, q), p, atol=1e-9)


# ---- jacobian ---------------------------------------------------------------

def test_jacobian_matches_central_differences():
    rng = np.random.default_rng(5)
    for _ in range(100):
        leg = int(rng.integers(4))
        q = rng.uniform([-0.8, -1.5, -2.6], [0.8, 1.5, -0.1])
        J = foot_jacobian(ROBOT, leg, q)
        J_fd = fd_jacobian(lambda qq: forward_kinematics(ROBOT, leg, qq), q)
        assert np.max(np.abs(J - J_fd)) < 1e-6


def test_abduction_column_leaves_sagittal_plane_at_zero_pose():
    J = foot_jacobian(ROBOT, 0, np.zeros(3))
    # Rolling about x moves the straight-down foot in y and z only.
    assert J[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert abs(J[1, 0]) + abs(J[2, 0]) > 0.01


def test_jacobian_is_singular_at_full_extension():
    J = foot_jacobian(ROBOT, 2, np.array([0.2, 0.4, 0.0]))
    assert abs(np.linalg.det(J)) < 1e-10
