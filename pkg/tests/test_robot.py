"""Leg kinematics: forward chain, IK branch selection, workspace clamping."""

import math

import numpy as np
import pytest

from latgait.errors import Unreachable
from latgait.robot import (
    RobotModel,
    clamp_foot_target,
    forward_kinematics,
    hexapod,
    inverse_kinematics_leg,
    leg_forward,
    quadruped,
    workspace_radial_band,
    wrap_angle,
)


def _single_leg_model(hip_x=0.25, hip_y=0.0, mount_yaw=0.0):
    return RobotModel(
        name="single",
        hip_offsets=np.array([[hip_x, hip_y, mount_yaw]]),
        link_lengths=np.array([0.1, 0.3, 0.3]),
        joint_limits=np.array([[-1.57, 1.57]] * 3),
        nominal_height=0.25,
        nominal_radial_offset=0.5,
        swing_first=(0,),
    )


def _fk_oracle(model, leg, q):
    """Homogeneous-transform composition, independent of leg_forward."""

    def rz(a):
        c, s = math.cos(a), math.sin(a)
        return np.array(
            [[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
        )

    def ry(a):
        c, s = math.cos(a), math.sin(a)
        return np.array(
            [[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1]]
        )

    def trans(x, y, z):
        t = np.eye(4)
        t[:3, 3] = (x, y, z)
        return t

    hx, hy, myaw = model.hip_offsets[leg]
    l1, l2, l3 = model.link_lengths
    t = (
        trans(hx, hy, 0.0)
        @ rz(myaw + q[0])
        @ trans(l1, 0, 0)
        @ ry(q[1])
        @ trans(l2, 0, 0)
        @ ry(q[2])
        @ trans(l3, 0, 0)
    )
    return t[:3, 3]


def test_fk_stretched_zero_angles():
    model = _single_leg_model()
    foot = leg_forward(model, 0, np.zeros(3))
    assert np.allclose(foot, [0.95, 0.0, 0.0], atol=1e-12)


def test_fk_hip_yaw_quarter_turn():
    model = _single_leg_model()
    foot = leg_forward(model, 0, np.array([math.pi / 2, 0.0, 0.0]))
    assert np.allclose(foot, [0.25, 0.7, 0.0], atol=1e-12)


def test_fk_matches_transform_chain():
    model = hexapod()
    q = np.array([0.3, -0.4, 0.8])
    for leg in range(model.leg_count):
        got = leg_forward(model, leg, q)
        want = _fk_oracle(model, leg, q)
        assert np.max(np.abs(got - want)) < 1e-12

    rng = np.random.default_rng(0)
    for _ in range(200):
        leg = int(rng.integers(0, model.leg_count))
        q = rng.uniform(-1.5, 1.5, size=3)
        got = leg_forward(model, leg, q)
        want = _fk_oracle(model, leg, q)
        assert np.max(np.abs(got - want)) < 1e-12


def test_forward_kinematics_all_legs():
    model = hexapod()
    feet = forward_kinematics(model, model.nominal_stance_angles)
    assert feet.shape == (model.leg_count, 3)
    for leg in range(model.leg_count):
        single = leg_forward(model, leg, model.nominal_stance_angles[leg])
        assert np.array_equal(feet[leg], single)


def test_ik_nominal_round_trip():
    for model in (hexapod(), quadruped()):
        feet = model.nominal_footholds()
        for leg in range(model.leg_count):
            q = inverse_kinematics_leg(model, leg, feet[leg])
            assert np.max(np.abs(q - model.nominal_stance_angles[leg])) < 1e-9


def test_ik_round_trip_random():
    model = hexapod()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        leg = int(rng.integers(0, model.leg_count))
        z = float(rng.uniform(-0.35, -0.12))
        lo, hi = workspace_radial_band(model, z)
        u = float(rng.uniform(lo + 1e-6, hi - 1e-6))
        hx, hy, myaw = model.hip_offsets[leg]
        psi = myaw + float(rng.uniform(-1.5, 1.5))
        target = np.array([hx + u * math.cos(psi), hy + u * math.sin(psi), z])
        q = inverse_kinematics_leg(model, leg, target)
        err = float(np.max(np.abs(leg_forward(model, leg, q) - target)))
        worst = max(worst, err)
    assert worst < 1e-9


def test_ik_elbow_down_branch():
    model = hexapod()
    rng = np.random.default_rng(2)
    for _ in range(100):
        z = float(rng.uniform(-0.3, -0.15))
        lo, hi = workspace_radial_band(model, z)
        u = float(rng.uniform(lo + 1e-6, hi - 1e-6))
        hx, hy, myaw = model.hip_offsets[0]
        target = np.array([hx + u * math.cos(myaw), hy + u * math.sin(myaw), z])
        q = inverse_kinematics_leg(model, 0, target)
        assert q[2] >= 0.0


def test_ik_unreachable_raises():
    model = hexapod()
    hx, hy, myaw = model.hip_offsets[0]
    far = np.array([hx + 5.0, hy, -0.25])
    with pytest.raises(Unreachable):
        inverse_kinematics_leg(model, 0, far)


def test_clamp_foot_target():
    model = hexapod()
    feet = model.nominal_footholds()
    same, was_clamped = clamp_foot_target(model, 0, feet[0])
    assert not was_clamped
    assert np.max(np.abs(same - feet[0])) < 1e-9

    hx, hy, myaw = model.hip_offsets[0]
    far = np.array([hx + 5.0, hy, -0.25])
    clamped, was_clamped = clamp_foot_target(model, 0, far)
    assert was_clamped
    q = inverse_kinematics_leg(model, 0, clamped)
    assert np.max(np.abs(leg_forward(model, 0, q) - clamped)) < 1e-9


def test_disabled_legs():
    model = hexapod()
    damaged = model.with_disabled_legs((2, 3))
    assert damaged.disabled_legs == (2, 3)
    # damage is part of the robot identity: artifacts trained on one must
    # not silently pass as the other
    assert damaged.geometry_hash() != model.geometry_hash()
    assert model.with_disabled_legs(()).geometry_hash() == model.geometry_hash()
    with pytest.raises(IndexError):
        model.with_disabled_legs((9,))


def test_wrap_angle():
    assert abs(wrap_angle(0.0)) == 0.0
    assert abs(wrap_angle(math.pi + 0.1) - (-math.pi + 0.1)) < 1e-12
    assert abs(wrap_angle(-math.pi - 0.1) - (math.pi - 0.1)) < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = float(rng.uniform(-20, 20))
        w = wrap_angle(a)
        assert -math.pi <= w <= math.pi
        assert abs(math.sin(w - a)) < 1e-9
