"""Scripted gait experts.

An expert is one cycle of alternating-support walking (tripod pairs on the
hexapod, diagonal pairs on the quadruped) realizing a commanded per-cycle
CoM motion (dx, dy, dyaw).  Stance feet sweep the exact paths that keep
them planted while the body tracks the command; swing feet lift on a
half-sine and land on targets from the footstep feedback law, using the
half-cycle command so the cycle closes on itself: the angles at phase 1
equal the nominal stance exactly.

Each generated expert is validated by rolling its angle rows through the
simulator and recording the CoM motion actually produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sim as simmod
from .errors import EmptyLibrary, InvalidShape
from .robot import RobotModel, clamp_foot_target, inverse_kinematics_leg, wrap_angle
from .util import payload_hash


@dataclass(frozen=True)
class ComCommand:
    """Per-cycle body motion: forward/left translation (m) and yaw (rad)."""

    dx: float
    dy: float
    dyaw: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dyaw])


@dataclass(frozen=True)
class CommandBounds:
    """Admissible command set: ||(dx, dy)|| <= max_step, |dyaw| <= max_yaw."""

    max_step: float = 0.15
    max_yaw: float = 0.3

    def validate(self, cmd: ComCommand) -> None:
        if math.hypot(cmd.dx, cmd.dy) > self.max_step + 1e-12:
            raise ValueError(
                f"step length {math.hypot(cmd.dx, cmd.dy):.4f} exceeds {self.max_step}"
            )
        if abs(cmd.dyaw) > self.max_yaw + 1e-12:
            raise ValueError(f"|dyaw| {abs(cmd.dyaw):.4f} exceeds {self.max_yaw}")

    def sample(self, rng: np.random.Generator) -> ComCommand:
        # translation box scaled by 1/sqrt(2) so the norm bound holds for
        # every draw without rejection
        half = self.max_step / math.sqrt(2.0)
        dx = float(rng.uniform(-half, half))
        dy = float(rng.uniform(-half, half))
        dyaw = float(rng.uniform(-self.max_yaw, self.max_yaw))
        return ComCommand(dx, dy, dyaw)


@dataclass(frozen=True)
class ExpertConfig:
    cycle_steps: int = 100
    swing_clearance: float = 0.04
    bounds: CommandBounds = field(default_factory=CommandBounds)


def footstep_targets(cmd: ComCommand, foot_positions: np.ndarray) -> np.ndarray:
    """Foot targets compensating a commanded CoM motion.

    For each body-frame foot at radius r and bearing g from the body
    center, the target displacement is

        dx_f = dx + r * (cos(g + dyaw) - cos(g))
        dy_f = dy + r * (sin(g + dyaw) - sin(g))

    which keeps every foot at the same body-relative placement after the
    body has moved by the command.
    """
    feet = np.asarray(foot_positions, dtype=float)
    if feet.ndim != 2 or feet.shape[1] != 2:
        raise InvalidShape("foot_positions must be (legs, 2)")
    out = np.empty_like(feet)
    for i, (fx, fy) in enumerate(feet):
        r = math.hypot(fx, fy)
        g = math.atan2(fy, fx)
        out[i, 0] = fx + cmd.dx + r * (math.cos(g + cmd.dyaw) - math.cos(g))
        out[i, 1] = fy + cmd.dy + r * (math.sin(g + cmd.dyaw) - math.sin(g))
    return out


def tripod_phase(t: float, leg: int, model: RobotModel) -> tuple[bool, float]:
    """Whether `leg` swings at cycle phase t in (0, 1], and its local phase.

    Legs in model.swing_first swing during the first half cycle; the rest
    swing during the second half.  The local phase runs (0, 1] within the
    leg's current half.
    """
    if not 0.0 < t <= 1.0 + 1e-12:
        raise ValueError(f"phase {t} outside (0, 1]")
    first_half = t <= 0.5
    local = 2.0 * t if first_half else 2.0 * (t - 0.5)
    swings_first = leg in model.swing_first
    is_swing = first_half == swings_first
    return is_swing, local


def swing_trajectory(
    p_from: np.ndarray,
    p_to: np.ndarray,
    local_phase: float,
    nominal_height: float,
    clearance: float = 0.04,
) -> np.ndarray:
    """Swing-foot position at a local phase in (0, 1].

    XY interpolates linearly from lift point to target; height follows a
    half-sine arc of the given clearance above the ground plane.
    """
    p_from = np.asarray(p_from, dtype=float)
    p_to = np.asarray(p_to, dtype=float)
    s = float(local_phase)
    x = p_from[0] + (p_to[0] - p_from[0]) * s
    y = p_from[1] + (p_to[1] - p_from[1]) * s
    z = -nominal_height + clearance * math.sin(math.pi * s)
    return np.array([x, y, z])


def _rot(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass
class ExpertTrajectory:
    command: ComCommand
    joint_angles: np.ndarray
    measured_com_delta: np.ndarray
    clamp_events: int

    @property
    def cycle_steps(self) -> int:
        return int(self.joint_angles.shape[0])


def expert_angle_rows(
    model: RobotModel, cmd: ComCommand, cfg: ExpertConfig | None = None
) -> tuple[np.ndarray, int]:
    """Joint-angle rows of one expert cycle, without the validation rollout.

    Row n commands phase (n + 1) / cycle_steps.  Also returns how many
    foot targets had to be pulled back into the workspace.
    """
    cfg = cfg or ExpertConfig()
    cfg.bounds.validate(cmd)
    N = cfg.cycle_steps
    h = model.nominal_height
    p0 = model.nominal_footholds()[:, :2]
    c_full = np.array([cmd.dx, cmd.dy])
    half_t = c_full / 2.0

    # second-half stance anchors: where each first-half swing leg must land
    # so that its stance sweep ends exactly at the nominal foothold
    anchors_a = {
        leg: c_full + _rot(cmd.dyaw) @ p0[leg] for leg in model.swing_first
    }
    # half-cycle commands whose footstep targets close the cycle exactly
    cmd_a = ComCommand(*(_rot(-cmd.dyaw / 2.0) @ half_t), cmd.dyaw / 2.0)
    cmd_b = ComCommand(half_t[0], half_t[1], cmd.dyaw / 2.0)

    second_half_legs = [i for i in range(model.leg_count) if i not in model.swing_first]
    lift_b = {
        leg: _rot(-cmd.dyaw / 2.0) @ (p0[leg] - half_t) for leg in second_half_legs
    }
    swing_to_a = {
        leg: footstep_targets(cmd_a, p0[leg : leg + 1])[0] for leg in model.swing_first
    }
    swing_to_b = {
        leg: footstep_targets(cmd_b, lift_b[leg][None, :])[0]
        for leg in second_half_legs
    }

    angles = np.empty((N, model.joints))
    clamp_events = 0
    for n in range(N):
        t = (n + 1.0) / N
        ct = t * c_full
        gt = t * cmd.dyaw
        rot_bt = _rot(-gt)
        for leg in range(model.leg_count):
            is_swing, local = tripod_phase(t, leg, model)
            if is_swing:
                if leg in model.swing_first:
                    p_from, p_to = p0[leg], swing_to_a[leg]
                else:
                    p_from, p_to = lift_b[leg], swing_to_b[leg]
                target = swing_trajectory(
                    p_from, p_to, local, h, cfg.swing_clearance
                )
            else:
                anchor = anchors_a[leg] if leg in model.swing_first else p0[leg]
                xy = rot_bt @ (anchor - ct)
                target = np.array([xy[0], xy[1], -h])
            target, clamped = clamp_foot_target(model, leg, target)
            if clamped:
                clamp_events += 1
            angles[n, 3 * leg : 3 * leg + 3] = inverse_kinematics_leg(
                model, leg, target
            )

    lo = np.tile(model.joint_limits[:, 0], model.leg_count)
    hi = np.tile(model.joint_limits[:, 1], model.leg_count)
    return np.clip(angles, lo, hi), clamp_events


def generate_expert(
    model: RobotModel,
    cmd: ComCommand,
    cfg: ExpertConfig | None = None,
    sim_cfg: simmod.SimConfig | None = None,
) -> ExpertTrajectory:
    """One open-loop gait cycle realizing `cmd`, plus its simulated outcome.

    The returned trajectory holds the angle rows and the CoM delta the
    simulator measures when the rows are replayed from nominal stance.
    """
    cfg = cfg or ExpertConfig()
    sim_cfg = sim_cfg or simmod.SimConfig()
    angles, clamp_events = expert_angle_rows(model, cmd, cfg)
    sim = simmod.Simulator(model=model, cfg=sim_cfg, seed=0)
    sim.run_rows(angles)
    x, y, yaw, _, _ = sim.com()
    measured = np.array([x, y, wrap_angle(yaw)])
    return ExpertTrajectory(
        command=cmd,
        joint_angles=angles,
        measured_com_delta=measured,
        clamp_events=clamp_events,
    )


@dataclass
class ExpertLibrary:
    """A set of expert cycles for one robot, with provenance metadata."""

    model_name: str
    model_hash: str
    cycle_steps: int
    commands: np.ndarray
    joint_angles: np.ndarray
    measured_deltas: np.ndarray
    clamp_events: np.ndarray
    joint_limits: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return int(self.commands.shape[0])

    @property
    def joints(self) -> int:
        return int(self.joint_angles.shape[2])

    def trajectory(self, g: int) -> ExpertTrajectory:
        if not 0 <= g < self.size:
            raise IndexError(f"expert index {g} out of range")
        return ExpertTrajectory(
            command=ComCommand(*(float(v) for v in self.commands[g])),
            joint_angles=self.joint_angles[g],
            measured_com_delta=self.measured_deltas[g],
            clamp_events=int(self.clamp_events[g]),
        )

    def to_dict(self) -> dict:
        return {
            "kind": "expert_library",
            "model_name": self.model_name,
            "model_hash": self.model_hash,
            "cycle_steps": self.cycle_steps,
            "seed": self.seed,
            "commands": self.commands.tolist(),
            "joint_angles": self.joint_angles.tolist(),
            "measured_deltas": self.measured_deltas.tolist(),
            "clamp_events": self.clamp_events.tolist(),
            "joint_limits": self.joint_limits.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertLibrary":
        if d.get("kind") != "expert_library":
            raise ValueError("not an expert library payload")
        return cls(
            model_name=d["model_name"],
            model_hash=d["model_hash"],
            cycle_steps=int(d["cycle_steps"]),
            commands=np.asarray(d["commands"], dtype=float),
            joint_angles=np.asarray(d["joint_angles"], dtype=float),
            measured_deltas=np.asarray(d["measured_deltas"], dtype=float),
            clamp_events=np.asarray(d["clamp_events"], dtype=int),
            joint_limits=np.asarray(d["joint_limits"], dtype=float),
            seed=int(d["seed"]),
        )

    def content_hash(self) -> str:
        return payload_hash(self.to_dict())


def sample_expert_library(
    model: RobotModel,
    count: int,
    seed: int,
    cfg: ExpertConfig | None = None,
    sim_cfg: simmod.SimConfig | None = None,
) -> ExpertLibrary:
    """Draw `count` commands uniformly from the command box and build one
    expert per command.  Deterministic in (model, count, seed, cfg)."""
    if count < 1:
        raise EmptyLibrary("expert library needs at least one trajectory")
    cfg = cfg or ExpertConfig()
    rng = np.random.default_rng(seed)
    commands = np.empty((count, 3))
    angles = np.empty((count, cfg.cycle_steps, model.joints))
    measured = np.empty((count, 3))
    clamps = np.empty(count, dtype=int)
    for g in range(count):
        cmd = cfg.bounds.sample(rng)
        traj = generate_expert(model, cmd, cfg, sim_cfg)
        commands[g] = cmd.as_array()
        angles[g] = traj.joint_angles
        measured[g] = traj.measured_com_delta
        clamps[g] = traj.clamp_events
    return ExpertLibrary(
        model_name=model.name,
        model_hash=model.geometry_hash(),
        cycle_steps=cfg.cycle_steps,
        commands=commands,
        joint_angles=angles,
        measured_deltas=measured,
        clamp_events=clamps,
        joint_limits=model.joint_limits.copy(),
        seed=seed,
    )
