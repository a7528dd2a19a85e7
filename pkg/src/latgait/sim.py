"""Kinematic 2.5D simulator.

The body moves in SE(2) at a fixed ride height.  Each timestep: joints
servo toward their commanded angles under a rate limit, feet touching the
ground plane become anchors, the body pose is re-estimated by rigidly
registering stance feet onto their anchors, anchors drag when foot
residuals exceed a slip threshold, and a smoothed body-frame velocity is
maintained.  Fewer than two stance feet leaves the pose frozen for that
step and counts as an instability event.

The per-step loop lives in a kernel (compiled when available, pure Python
otherwise; see simcore).  Everything here is deterministic given the
initial state's seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import simcore
from .errors import DimensionMismatch, InsufficientStance, InvalidShape
from .robot import RobotModel, wrap_angle


@dataclass(frozen=True)
class SimConfig:
    """Simulator parameters.

    dt: timestep, seconds.
    servo_rate_limit: max joint speed, rad/s.
    contact_epsilon: feet within this height of the ground count as contact, m.
    slip_threshold: stance-foot residual beyond which the anchor drags, m.
    slip_gain: fraction of the excess residual the anchor moves per step.
    registration_noise_std: std of Gaussian noise added to each pose update
        (same value for the two translation components, m, and yaw, rad).
    ground_height: world ground plane height, m.
    velocity_smoothing: exponential smoothing factor for the velocity
        estimate (weight on the newest sample).
    """

    dt: float = 0.01
    servo_rate_limit: float = 3.0
    contact_epsilon: float = 0.005
    slip_threshold: float = 0.01
    slip_gain: float = 0.5
    registration_noise_std: float = 0.0
    ground_height: float = 0.0
    velocity_smoothing: float = 0.1

    def params_vector(self) -> np.ndarray:
        return np.array(
            [
                self.dt,
                self.servo_rate_limit,
                self.contact_epsilon,
                self.slip_threshold,
                self.slip_gain,
                self.velocity_smoothing,
                self.ground_height,
            ]
        )


@dataclass
class SimState:
    """Full simulator state.  foot_anchors rows are only meaningful for
    legs whose stance flag is set."""

    joint_angles: np.ndarray
    foot_anchors: np.ndarray
    stance_flags: np.ndarray
    pose: np.ndarray
    velocity: np.ndarray
    step_index: int
    rng: np.random.Generator
    instability_events: int = 0
    slip_events: int = 0

    def clone(self) -> "SimState":
        g = np.random.Generator(np.random.PCG64())
        g.bit_generator.state = self.rng.bit_generator.state
        return SimState(
            joint_angles=self.joint_angles.copy(),
            foot_anchors=self.foot_anchors.copy(),
            stance_flags=self.stance_flags.copy(),
            pose=self.pose.copy(),
            velocity=self.velocity.copy(),
            step_index=self.step_index,
            rng=g,
            instability_events=self.instability_events,
            slip_events=self.slip_events,
        )

    def anchor_map(self) -> dict[int, tuple[float, float]]:
        """World anchors of the stance feet only."""
        return {
            int(i): (float(self.foot_anchors[i, 0]), float(self.foot_anchors[i, 1]))
            for i in np.flatnonzero(self.stance_flags)
        }

    def com_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            float(self.pose[0]),
            float(self.pose[1]),
            float(self.pose[2]),
            float(self.velocity[0]),
            float(self.velocity[1]),
        )


@dataclass
class CycleLog:
    """Per-step trace of one kernel call (usually one gait cycle)."""

    start_pose: np.ndarray
    poses: np.ndarray
    velocities: np.ndarray
    stance_masks: np.ndarray
    joint_angles: np.ndarray
    instability_events: int
    slip_events: int

    @property
    def steps(self) -> int:
        return int(self.poses.shape[0])


def make_state(model: RobotModel, cfg: SimConfig, seed: int = 0) -> SimState:
    """Fresh state at the world origin in the nominal stance.

    No feet are anchored yet; the first step detects contact and anchors
    them in place, so the pose stays put until commands arrive.
    """
    L = model.leg_count
    return SimState(
        joint_angles=model.nominal_stance_angles.copy(),
        foot_anchors=np.zeros((L, 2)),
        stance_flags=np.zeros(L, dtype=np.uint8),
        pose=np.zeros(3),
        velocity=np.zeros(2),
        step_index=0,
        rng=np.random.default_rng(seed),
    )


def _disabled_vector(model: RobotModel) -> np.ndarray:
    dis = np.zeros(model.leg_count, dtype=np.uint8)
    for i in model.disabled_legs:
        dis[i] = 1
    return dis


def _run_kernel(
    state: SimState, model: RobotModel, cfg: SimConfig, qdes: np.ndarray
) -> CycleLog:
    """Advance `state` in place through the commanded angle rows."""
    n = qdes.shape[0]
    L = model.leg_count
    if cfg.registration_noise_std > 0.0:
        noise = state.rng.standard_normal((n, 3)) * cfg.registration_noise_std
    else:
        noise = np.zeros((n, 3))
    links = np.array([*model.link_lengths, model.nominal_height])
    log_pose = np.empty((n, 3))
    log_vel = np.empty((n, 2))
    log_stance = np.empty(n, dtype=np.int64)
    log_q = np.empty((n, L, 3))
    start_pose = state.pose.copy()
    instab, slips = simcore.run_steps(
        np.ascontiguousarray(model.hip_offsets),
        links,
        np.ascontiguousarray(model.nominal_stance_angles),
        _disabled_vector(model),
        cfg.params_vector(),
        state.joint_angles,
        state.foot_anchors,
        state.stance_flags,
        state.pose,
        state.velocity,
        np.ascontiguousarray(qdes),
        noise,
        log_pose,
        log_vel,
        log_stance,
        log_q,
    )
    state.step_index += n
    state.instability_events += instab
    state.slip_events += slips
    return CycleLog(
        start_pose=start_pose,
        poses=log_pose,
        velocities=log_vel,
        stance_masks=log_stance,
        joint_angles=log_q,
        instability_events=int(instab),
        slip_events=int(slips),
    )


def _clamp_to_limits(model: RobotModel, qdes: np.ndarray) -> np.ndarray:
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return np.clip(qdes, lo, hi)


def step(
    state: SimState, q_des: np.ndarray, cfg: SimConfig, model: RobotModel
) -> SimState:
    """One timestep toward commanded joint angles; returns the new state."""
    q_des = np.asarray(q_des, dtype=float)
    if q_des.shape != (model.leg_count, 3):
        raise InvalidShape(
            f"q_des must be ({model.leg_count}, 3), got {q_des.shape}"
        )
    new = state.clone()
    qdes = _clamp_to_limits(model, q_des)[None, :, :]
    _run_kernel(new, model, cfg, qdes)
    return new


def rollout_cycle(
    state: SimState,
    policy,
    z: np.ndarray,
    cfg: SimConfig,
    model: RobotModel,
    n_steps: int | None = None,
) -> tuple[CycleLog, tuple[float, float, float, float, float]]:
    """Run one full gait cycle of a latent-conditioned policy.

    `policy` is either an object with cycle_angles(z, n) -> (n, joints) or a
    callable (phases, z) -> (n, joints).  Mutates `state` in place and
    returns the per-step log plus the resulting CoM tuple
    (x, y, yaw, vx, vy).
    """
    z = np.asarray(z, dtype=float).ravel()
    if hasattr(policy, "cycle_angles"):
        if hasattr(policy, "latent_dim") and z.shape[0] != policy.latent_dim:
            raise DimensionMismatch(
                f"latent code has dim {z.shape[0]}, policy expects {policy.latent_dim}"
            )
        n = n_steps or getattr(policy, "cycle_steps", 100)
        angles = policy.cycle_angles(z, n)
    else:
        n = n_steps or 100
        phases = (np.arange(n) + 1.0) / n
        angles = policy(phases, z)
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (n, model.joints):
        raise InvalidShape(
            f"policy produced {angles.shape}, expected ({n}, {model.joints})"
        )
    qdes = _clamp_to_limits(model, angles.reshape(n, model.leg_count, 3))
    log = _run_kernel(state, model, cfg, qdes)
    return log, state.com_tuple()


def run_angle_rows(
    state: SimState, rows: np.ndarray, cfg: SimConfig, model: RobotModel
) -> CycleLog:
    """Advance the state through precomputed joint-angle rows (n, legs, 3)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 2:
        rows = rows.reshape(rows.shape[0], model.leg_count, 3)
    if rows.shape[1:] != (model.leg_count, 3):
        raise InvalidShape(f"rows must be (n, {model.leg_count}, 3)")
    return _run_kernel(state, model, cfg, _clamp_to_limits(model, rows))


def register_stance_motion(
    anchors: np.ndarray, body_feet: np.ndarray, prior_pose: np.ndarray
) -> tuple[float, float, float]:
    """Pose update that best maps body-frame feet onto their world anchors.

    Solves the planar rigid registration world = R(yaw) body + t in closed
    form (least squares over all stance feet) and returns the update
    (dx, dy, dyaw) relative to prior_pose.  Requires at least two feet.
    """
    anchors = np.asarray(anchors, dtype=float)
    body_feet = np.asarray(body_feet, dtype=float)
    if anchors.ndim != 2 or anchors.shape[1] != 2 or anchors.shape != body_feet.shape:
        raise InvalidShape("anchors and body_feet must both be (k, 2)")
    k = anchors.shape[0]
    if k < 2:
        raise InsufficientStance(f"need at least 2 stance feet, got {k}")
    am = anchors.mean(axis=0)
    bm = body_feet.mean(axis=0)
    ac = anchors - am
    bc = body_feet - bm
    sc = float(np.sum(bc[:, 0] * ac[:, 1] - bc[:, 1] * ac[:, 0]))
    sd = float(np.sum(bc[:, 0] * ac[:, 0] + bc[:, 1] * ac[:, 1]))
    yaw = math.atan2(sc, sd)
    c, s = math.cos(yaw), math.sin(yaw)
    tx = float(am[0]) - (float(bm[0]) * c - float(bm[1]) * s)
    ty = float(am[1]) - (float(bm[0]) * s + float(bm[1]) * c)
    px, py, pyaw = (float(v) for v in prior_pose)
    return tx - px, ty - py, wrap_angle(yaw - pyaw)


@dataclass
class Simulator:
    """Bundles a robot, a config, and a live state.

    Thin convenience wrapper over the free functions; one instance is
    mutated sequentially and is not thread-safe.
    """

    model: RobotModel
    cfg: SimConfig = field(default_factory=SimConfig)
    state: SimState = field(init=False)
    seed: int = 0

    def __post_init__(self) -> None:
        self.state = make_state(self.model, self.cfg, self.seed)

    def reset(self, seed: int | None = None) -> SimState:
        if seed is not None:
            self.seed = int(seed)
        self.state = make_state(self.model, self.cfg, self.seed)
        return self.state

    def step(self, q_des: np.ndarray) -> SimState:
        self.state = step(self.state, q_des, self.cfg, self.model)
        return self.state

    def run_cycle(self, policy, z, n_steps: int | None = None) -> CycleLog:
        log, _ = rollout_cycle(self.state, policy, z, self.cfg, self.model, n_steps)
        return log

    def run_rows(self, rows: np.ndarray) -> CycleLog:
        return run_angle_rows(self.state, rows, self.cfg, self.model)

    def com(self) -> tuple[float, float, float, float, float]:
        return self.state.com_tuple()

    def with_model(self, model: RobotModel) -> "Simulator":
        return Simulator(model=model, cfg=self.cfg, seed=self.seed)


def write_episode_csv(path, logs) -> None:
    """Write per-step traces as CSV: step, x, y, yaw, vx, vy, stance, q...

    `logs` is a CycleLog or a list of them; steps number consecutively.
    The stance column is a bitmask (bit i set = leg i in stance).
    """
    if isinstance(logs, CycleLog):
        logs = [logs]
    if not logs:
        raise ValueError("no logs to write")
    joints = logs[0].joint_angles.shape[1] * 3
    header = ["step", "x", "y", "yaw", "vx", "vy", "stance"] + [
        f"q{i}" for i in range(joints)
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        step_no = 0
        for log in logs:
            flat_q = log.joint_angles.reshape(log.steps, -1)
            for i in range(log.steps):
                row = [
                    step_no,
                    repr(float(log.poses[i, 0])),
                    repr(float(log.poses[i, 1])),
                    repr(float(log.poses[i, 2])),
                    repr(float(log.velocities[i, 0])),
                    repr(float(log.velocities[i, 1])),
                    int(log.stance_masks[i]),
                ] + [repr(float(v)) for v in flat_q[i]]
                writer.writerow(row)
                step_no += 1
