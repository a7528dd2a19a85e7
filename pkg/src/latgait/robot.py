"""Robot geometry and per-leg kinematics.

Legs are three-joint chains mounted on the body at ``hip_offsets``: a yaw
joint at the hip followed by two pitch joints (thigh, knee).  All kinematics
here are expressed in the body frame with z up and the body origin at the
hip plane; the ground sits at ``-nominal_height`` when the body is at its
nominal ride height.

Conventions:

* q1 is hip yaw relative to the leg mount direction.
* q2 is thigh pitch, positive rotating the leg down (standard right-hand
  rotation about the leg's lateral axis).
* q3 is knee flexion; the elbow-down branch has q3 >= 0.

With all angles at zero the leg points straight out along its mount
direction at full extension: planar reach L1 + L2 + L3, foot at hip height.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidShape, Unreachable

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi].

    Uses fmod so the compiled kernel (C fmod) and this function agree bit
    for bit on every input.
    """
    w = math.fmod(a + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


def rot2(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass(eq=False)
class RobotModel:
    """Morphology description shared by the simulator and the gait experts.

    hip_offsets has one row per leg: (hip_x, hip_y, mount_yaw), with the
    mount yaw pointing along the leg's zero-angle direction.  joint_limits
    is (3, 2): per-joint (min, max), shared by all legs.  disabled_legs
    lists legs that hold their nominal angles and never contribute commands
    (their feet stay planted and get dragged).
    """

    name: str
    hip_offsets: np.ndarray
    link_lengths: np.ndarray
    joint_limits: np.ndarray
    nominal_height: float
    nominal_radial_offset: float
    swing_first: tuple[int, ...]
    disabled_legs: tuple[int, ...] = ()
    nominal_stance_angles: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.hip_offsets = np.asarray(self.hip_offsets, dtype=float)
        self.link_lengths = np.asarray(self.link_lengths, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        if self.hip_offsets.ndim != 2 or self.hip_offsets.shape[1] != 3:
            raise InvalidShape("hip_offsets must be (legs, 3)")
        if self.link_lengths.shape != (3,):
            raise InvalidShape("link_lengths must be (3,)")
        if self.joint_limits.shape != (3, 2):
            raise InvalidShape("joint_limits must be (3, 2)")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint limit min must be < max")
        L = self.leg_count
        bad = [i for i in self.disabled_legs if not 0 <= i < L]
        if bad:
            raise IndexError(f"disabled leg index out of range: {bad}")
        self.disabled_legs = tuple(sorted(set(int(i) for i in self.disabled_legs)))
        groups = sorted(self.swing_first)
        if any(not 0 <= i < L for i in groups):
            raise IndexError("swing_first leg index out of range")
        self.swing_first = tuple(int(i) for i in groups)
        self.nominal_stance_angles = self._solve_nominal_stance()

    @property
    def leg_count(self) -> int:
        return int(self.hip_offsets.shape[0])

    @property
    def joints(self) -> int:
        return 3 * self.leg_count

    def _solve_nominal_stance(self) -> np.ndarray:
        """Nominal pose: every foot nominal_radial_offset out from its hip
        along the mount direction, on the ground plane."""
        angles = np.zeros((self.leg_count, 3))
        for leg in range(self.leg_count):
            hx, hy, myaw = self.hip_offsets[leg]
            tx = hx + self.nominal_radial_offset * math.cos(myaw)
            ty = hy + self.nominal_radial_offset * math.sin(myaw)
            angles[leg] = inverse_kinematics_leg(
                self, leg, np.array([tx, ty, -self.nominal_height])
            )
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        if np.any(angles < lo) or np.any(angles > hi):
            raise ValueError("nominal stance violates joint limits")
        return angles

    def nominal_footholds(self) -> np.ndarray:
        return forward_kinematics(self, self.nominal_stance_angles)

    def with_disabled_legs(self, legs: tuple[int, ...]) -> "RobotModel":
        return RobotModel(
            name=self.name,
            hip_offsets=self.hip_offsets.copy(),
            link_lengths=self.link_lengths.copy(),
            joint_limits=self.joint_limits.copy(),
            nominal_height=self.nominal_height,
            nominal_radial_offset=self.nominal_radial_offset,
            swing_first=self.swing_first,
            disabled_legs=tuple(legs),
        )

    def geometry_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.name.encode())
        for arr in (self.hip_offsets, self.link_lengths, self.joint_limits):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        h.update(repr(float(self.nominal_height)).encode())
        h.update(repr(float(self.nominal_radial_offset)).encode())
        h.update(repr(self.swing_first).encode())
        h.update(repr(self.disabled_legs).encode())
        return h.hexdigest()


def leg_forward(model: RobotModel, leg: int, q: np.ndarray) -> np.ndarray:
    """Body-frame foot position of one leg given its (q1, q2, q3)."""
    l1, l2, l3 = model.link_lengths
    hx, hy, myaw = model.hip_offsets[leg]
    q1, q2, q3 = float(q[0]), float(q[1]), float(q[2])
    u = l1 + l2 * math.cos(q2) + l3 * math.cos(q2 + q3)
    z = -(l2 * math.sin(q2) + l3 * math.sin(q2 + q3))
    yaw = myaw + q1
    return np.array([hx + u * math.cos(yaw), hy + u * math.sin(yaw), z])


def forward_kinematics(model: RobotModel, joint_angles: np.ndarray) -> np.ndarray:
    """Foot positions (legs, 3) in the body frame for (legs, 3) joint angles."""
    joint_angles = np.asarray(joint_angles, dtype=float)
    if joint_angles.shape != (model.leg_count, 3):
        raise InvalidShape(
            f"joint_angles must be ({model.leg_count}, 3), got {joint_angles.shape}"
        )
    feet = np.empty((model.leg_count, 3))
    for leg in range(model.leg_count):
        feet[leg] = leg_forward(model, leg, joint_angles[leg])
    return feet


def inverse_kinematics_leg(
    model: RobotModel, leg: int, target: np.ndarray
) -> np.ndarray:
    """Joint angles placing one foot at a body-frame target, elbow down.

    Raises Unreachable when the target lies outside the annular workspace
    of the two pitch links.  The result always satisfies
    forward_kinematics(result) == target to floating-point accuracy; joint
    limits are the caller's concern (see clamp_foot_target).
    """
    if not 0 <= leg < model.leg_count:
        raise IndexError(f"leg index {leg} out of range")
    target = np.asarray(target, dtype=float)
    if target.shape != (3,):
        raise InvalidShape("target must be (3,)")
    l1, l2, l3 = (float(v) for v in model.link_lengths)
    hx, hy, myaw = (float(v) for v in model.hip_offsets[leg])
    dx, dy, z = float(target[0]) - hx, float(target[1]) - hy, float(target[2])
    u = math.hypot(dx, dy)
    a = u - l1
    rho = math.hypot(a, z)
    hi = l2 + l3
    lo = abs(l2 - l3)
    if rho > hi + 1e-12 or rho < lo - 1e-12:
        raise Unreachable(
            f"leg {leg}: planar distance {rho:.6f} outside [{lo:.6f}, {hi:.6f}]"
        )
    c3 = (rho * rho - l2 * l2 - l3 * l3) / (2.0 * l2 * l3)
    c3 = min(1.0, max(-1.0, c3))
    q3 = math.acos(c3)
    q2 = math.atan2(-z, a) - math.atan2(l3 * math.sin(q3), l2 + l3 * math.cos(q3))
    azimuth = math.atan2(dy, dx) if u > 1e-12 else myaw
    q1 = wrap_angle(azimuth - myaw)
    return np.array([q1, q2, q3])


def workspace_radial_band(model: RobotModel, z: float) -> tuple[float, float]:
    """Horizontal hip distances [u_min, u_max] reachable at height z with the
    elbow-down branch inside the joint limits, with a small safety margin."""
    l1, l2, l3 = (float(v) for v in model.link_lengths)
    q3_max = float(model.joint_limits[2, 1])
    rho_hi = (l2 + l3) * (1.0 - 1e-3)
    # largest q3 allowed fixes the smallest planar distance
    rho_lo = math.sqrt(l2 * l2 + l3 * l3 + 2.0 * l2 * l3 * math.cos(q3_max)) * (1.0 + 1e-3)
    z2 = z * z
    a_hi = math.sqrt(max(rho_hi * rho_hi - z2, 0.0))
    a_lo = math.sqrt(max(rho_lo * rho_lo - z2, 0.0))
    return l1 + a_lo, l1 + a_hi


def clamp_foot_target(
    model: RobotModel, leg: int, target: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Pull a body-frame foot target into the reachable radial band.

    Keeps the target's height and azimuth from the hip, adjusting only the
    horizontal distance.  Returns (possibly new target, whether clamping
    happened).
    """
    target = np.asarray(target, dtype=float)
    hx, hy, _ = (float(v) for v in model.hip_offsets[leg])
    dx, dy, z = float(target[0]) - hx, float(target[1]) - hy, float(target[2])
    u = math.hypot(dx, dy)
    u_lo, u_hi = workspace_radial_band(model, z)
    u_new = min(u_hi, max(u_lo, u))
    if u_new == u and u > 1e-12:
        return target, False
    if u > 1e-12:
        scale = u_new / u
        new = np.array([hx + dx * scale, hy + dy * scale, z])
    else:
        myaw = float(model.hip_offsets[leg][2])
        new = np.array([hx + u_new * math.cos(myaw), hy + u_new * math.sin(myaw), z])
    return new, True


def hexapod(
    hip_radius: float = 0.55,
    link_lengths: tuple[float, float, float] = (0.1, 0.3, 0.3),
    nominal_height: float = 0.25,
    joint_limit: float = 1.57,
    nominal_radial_offset: float = 0.5,
    disabled_legs: tuple[int, ...] = (),
) -> RobotModel:
    """Six legs on a regular hexagon, mounts pointing radially out.

    Legs are numbered counterclockwise starting front-left (azimuth 30 deg),
    so legs 2 and 3 are the hind pair.  Alternating legs {0, 2, 4} form the
    tripod that swings first.
    """
    azimuths = np.deg2rad(np.array([30.0, 90.0, 150.0, 210.0, 270.0, 330.0]))
    hips = np.stack(
        [hip_radius * np.cos(azimuths), hip_radius * np.sin(azimuths), azimuths],
        axis=1,
    )
    limits = np.array([[-joint_limit, joint_limit]] * 3)
    return RobotModel(
        name="hexapod",
        hip_offsets=hips,
        link_lengths=np.asarray(link_lengths, dtype=float),
        joint_limits=limits,
        nominal_height=nominal_height,
        nominal_radial_offset=nominal_radial_offset,
        swing_first=(0, 2, 4),
        disabled_legs=disabled_legs,
    )


def quadruped(
    body_length: float = 0.5,
    body_width: float = 0.3,
    link_lengths: tuple[float, float, float] = (0.1, 0.3, 0.3),
    nominal_height: float = 0.25,
    joint_limit: float = 1.57,
    nominal_radial_offset: float = 0.5,
    disabled_legs: tuple[int, ...] = (),
) -> RobotModel:
    """Four legs at the corners of a body_length x body_width rectangle.

    Order: front-left, front-right, rear-left, rear-right; mounts point
    radially away from the body center.  Diagonal pair {0, 3} swings first
    (two-beat trot split).
    """
    half_l, half_w = body_length / 2.0, body_width / 2.0
    corners = np.array(
        [
            [half_l, half_w],
            [half_l, -half_w],
            [-half_l, half_w],
            [-half_l, -half_w],
        ]
    )
    yaws = np.arctan2(corners[:, 1], corners[:, 0])
    hips = np.column_stack([corners, yaws])
    limits = np.array([[-joint_limit, joint_limit]] * 3)
    return RobotModel(
        name="quadruped",
        hip_offsets=hips,
        link_lengths=np.asarray(link_lengths, dtype=float),
        joint_limits=limits,
        nominal_height=nominal_height,
        nominal_radial_offset=nominal_radial_offset,
        swing_first=(0, 3),
        disabled_legs=disabled_legs,
    )
