"""Sampling-based planner over per-cycle actions.

The high level picks one action per gait cycle by random shooting: draw K
candidate action sequences, roll them through the learned CoM dynamics,
keep the cheapest.  Actions are latent codes by default; the same machinery
runs the discrete-library baseline (candidates restricted to the trained
codes) and the command-oracle baseline (candidates are CoM commands
executed by the scripted footstep controller, bypassing the learned
policy).

Tasks: track a body-frame velocity and heading, reach a pose, or follow a
timed waypoint sequence.  Costs weight velocity/position error 2 and yaw
error 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .dynamics import ComState, DynamicsModel
from .errors import DimensionMismatch, InvalidShape, WrongTaskKind
from .expert import ComCommand, ExpertConfig, expert_angle_rows
from .robot import RobotModel, wrap_angle
from .util import payload_hash, write_json

TASK_KINDS = ("velocity", "goal", "trajectory")


@dataclass(frozen=True)
class TaskSpec:
    """One planning task.

    velocity: track target body-frame (vx, vy) and world heading.
    goal: reach pose (x, y, yaw).
    trajectory: follow waypoints[k] = (x, y, yaw), one per cycle, holding
    the last waypoint once the schedule runs out.
    """

    kind: str
    velocity: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    goal: tuple[float, float, float] = (0.0, 0.0, 0.0)
    waypoints: tuple[tuple[float, float, float], ...] = ()
    weights: tuple[float, float] = (2.0, 1.0)

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise WrongTaskKind(f"unknown task kind {self.kind!r}")
        if self.kind == "trajectory" and not self.waypoints:
            raise ValueError("trajectory task needs waypoints")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "velocity": list(self.velocity),
            "heading": self.heading,
            "goal": list(self.goal),
            "waypoints": [list(w) for w in self.waypoints],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            kind=d["kind"],
            velocity=tuple(d.get("velocity", (0.0, 0.0))),
            heading=float(d.get("heading", 0.0)),
            goal=tuple(d.get("goal", (0.0, 0.0, 0.0))),
            waypoints=tuple(tuple(w) for w in d.get("waypoints", ())),
            weights=tuple(d.get("weights", (2.0, 1.0))),
        )


def velocity_task(vx: float, vy: float, heading: float = 0.0) -> TaskSpec:
    return TaskSpec(kind="velocity", velocity=(vx, vy), heading=heading)


def goal_task(x: float, y: float, yaw: float) -> TaskSpec:
    return TaskSpec(kind="goal", goal=(x, y, yaw))


def trajectory_task(waypoints: np.ndarray) -> TaskSpec:
    wps = tuple(tuple(float(v) for v in w) for w in np.asarray(waypoints))
    return TaskSpec(kind="trajectory", waypoints=wps)


def s_curve_waypoints(
    count: int = 41, spacing: float = 0.1, amplitude: float = 0.5
) -> np.ndarray:
    """Sinusoidal S-curve: x advances by `spacing` per cycle while y
    weaves; headings follow the curve tangent."""
    k = np.arange(count)
    x = spacing * k
    y = amplitude * np.sin(spacing * k * math.pi)
    yaw = np.arctan2(amplitude * spacing * math.pi * np.cos(spacing * k * math.pi), spacing)
    return np.column_stack([x, y, yaw])


def cost_velocity(s: ComState, task: TaskSpec) -> float:
    if task.kind != "velocity":
        raise WrongTaskKind(f"velocity cost on {task.kind!r} task")
    wv, wy = task.weights
    ev = math.hypot(task.velocity[0] - s.vx, task.velocity[1] - s.vy)
    ey = abs(wrap_angle(task.heading - s.yaw))
    return wv * ev + wy * ey


def cost_goal(s: ComState, task: TaskSpec) -> float:
    if task.kind != "goal":
        raise WrongTaskKind(f"goal cost on {task.kind!r} task")
    wv, wy = task.weights
    gx, gy, gyaw = task.goal
    ep = math.hypot(gx - s.x, gy - s.y)
    ey = abs(wrap_angle(gyaw - s.yaw))
    return wv * ep + wy * ey


def cost_trajectory(s: ComState, task: TaskSpec, step_index: int) -> float:
    if task.kind != "trajectory":
        raise WrongTaskKind(f"trajectory cost on {task.kind!r} task")
    wv, wy = task.weights
    wps = task.waypoints
    wp = wps[min(step_index, len(wps) - 1)]
    ep = math.hypot(wp[0] - s.x, wp[1] - s.y)
    ey = abs(wrap_angle(wp[2] - s.yaw))
    return wv * ep + wy * ey


def task_cost(s: ComState, task: TaskSpec, step_index: int = 0) -> float:
    if task.kind == "velocity":
        return cost_velocity(s, task)
    if task.kind == "goal":
        return cost_goal(s, task)
    return cost_trajectory(s, task, step_index)


def _wrap_vec(a: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sin(a), np.cos(a))


def make_cost(task: TaskSpec, base_step: int = 0):
    """Batched cost over (k, 5) state arrays; `h` is the horizon offset
    (trajectory tasks index waypoint base_step + 1 + h)."""
    wv, wy = task.weights

    if task.kind == "velocity":
        tvx, tvy = task.velocity
        th = task.heading

        def cost(states: np.ndarray, h: int) -> np.ndarray:
            ev = np.hypot(tvx - states[:, 3], tvy - states[:, 4])
            ey = np.abs(_wrap_vec(th - states[:, 2]))
            return wv * ev + wy * ey

        return cost

    if task.kind == "goal":
        gx, gy, gyaw = task.goal

        def cost(states: np.ndarray, h: int) -> np.ndarray:
            ep = np.hypot(gx - states[:, 0], gy - states[:, 1])
            ey = np.abs(_wrap_vec(gyaw - states[:, 2]))
            return wv * ep + wy * ey

        return cost

    wps = np.asarray(task.waypoints)

    def cost(states: np.ndarray, h: int) -> np.ndarray:
        wp = wps[min(base_step + 1 + h, len(wps) - 1)]
        ep = np.hypot(wp[0] - states[:, 0], wp[1] - states[:, 1])
        ey = np.abs(_wrap_vec(wp[2] - states[:, 2]))
        return wv * ep + wy * ey

    return cost


@dataclass(frozen=True)
class PlanConfig:
    samples: int = 8000
    horizon: int = 1
    seed: int = 0
    goal_position_tolerance: float = 0.1
    goal_yaw_tolerance: float = 0.2


class BoxActionSpace:
    """Uniform box of continuous actions."""

    def __init__(self, box: np.ndarray):
        box = np.asarray(box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise InvalidShape("box must be (dim, 2)")
        self.lo = box[:, 0]
        self.hi = box[:, 1]

    @property
    def dim(self) -> int:
        return int(self.lo.shape[0])

    def sample(self, rng: np.random.Generator, k: int, h: int) -> np.ndarray:
        # one C-ordered draw: the first k' candidates of a k-sample run
        # equal the full k'-sample run (prefix property)
        return rng.uniform(self.lo, self.hi, size=(k, h, self.dim))


class DiscreteActionSpace:
    """Candidates restricted to a fixed set of codes."""

    def __init__(self, codes: np.ndarray):
        codes = np.asarray(codes, dtype=float)
        if codes.ndim != 2:
            raise InvalidShape("codes must be (count, dim)")
        self.codes = codes

    @property
    def dim(self) -> int:
        return int(self.codes.shape[1])

    def sample(self, rng: np.random.Generator, k: int, h: int) -> np.ndarray:
        idx = rng.integers(0, self.codes.shape[0], size=(k, h))
        return self.codes[idx]


def random_shooting(
    model: DynamicsModel,
    state: ComState,
    cost_fn,
    cfg: PlanConfig,
    space,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Best action sequence among cfg.samples random candidates.

    Rolls all candidates through the dynamics model in a batch, sums the
    per-horizon-step costs, and returns (actions (horizon, dim), cost) of
    the argmin; ties break toward the lowest candidate index.
    """
    if space.dim != model.latent_dim:
        raise DimensionMismatch(
            f"action dim {space.dim} vs dynamics dim {model.latent_dim}"
        )
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    acts = space.sample(rng, cfg.samples, cfg.horizon)
    states = np.tile(state.as_array(), (cfg.samples, 1))
    total = np.zeros(cfg.samples)
    for h in range(cfg.horizon):
        states = dyn.predict_batch(model, states, acts[:, h, :])
        total += cost_fn(states, h)
    best = int(np.argmin(total))
    return acts[best].copy(), float(total[best])


class IkOraclePolicy:
    """Scripted low-level controller that takes CoM commands as 'codes'.

    Presents the same interface as a trained policy bundle (latent_dim,
    code_box, cycle_angles) but realizes each 3-dim action (dx, dy, dyaw)
    with the expert footstep/IK controller directly.  Used as the planner
    baseline that bypasses gait learning.
    """

    def __init__(
        self,
        model: RobotModel,
        expert_cfg: ExpertConfig | None = None,
    ):
        self.model = model
        self.expert_cfg = expert_cfg or ExpertConfig()
        b = self.expert_cfg.bounds
        half = b.max_step / math.sqrt(2.0)
        self.code_box = np.array(
            [[-half, half], [-half, half], [-b.max_yaw, b.max_yaw]]
        )
        self.latent_dim = 3
        self.cycle_steps = self.expert_cfg.cycle_steps
        self.model_hash = model.geometry_hash()

    def cycle_angles(self, z: np.ndarray, n_steps: int | None = None) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.shape[0] != 3:
            raise DimensionMismatch("command actions are 3-dimensional")
        cmd = ComCommand(float(z[0]), float(z[1]), float(z[2]))
        rows, _ = expert_angle_rows(self.model, cmd, self.expert_cfg)
        return rows

    def content_hash(self) -> str:
        return payload_hash(
            {
                "kind": "ik_oracle",
                "model_hash": self.model_hash,
                "cycle_steps": self.cycle_steps,
                "code_box": self.code_box.tolist(),
                "swing_clearance": self.expert_cfg.swing_clearance,
            }
        )


def make_ik_oracle(
    model: RobotModel, expert_cfg: ExpertConfig | None = None
) -> IkOraclePolicy:
    return IkOraclePolicy(model, expert_cfg)


@dataclass
class EpisodeLog:
    """Per-cycle planner trace plus outcome summary."""

    task: TaskSpec
    states: np.ndarray
    actions: np.ndarray
    predicted: np.ndarray
    realized: np.ndarray
    costs: np.ndarray
    reached: bool
    steps_to_goal: int | None
    instability_events: int
    slip_events: int

    @property
    def cycles(self) -> int:
        return int(self.actions.shape[0])

    @property
    def mean_step_cost(self) -> float:
        return float(self.costs.mean()) if self.costs.size else 0.0

    @property
    def terminal_state(self) -> ComState:
        row = self.realized[-1] if self.realized.size else self.states[0]
        return ComState.from_tuple(row)

    def summary(self) -> dict:
        s = {
            "task": self.task.to_dict(),
            "cycles": self.cycles,
            "mean_step_cost": self.mean_step_cost,
            "reached": self.reached,
            "steps_to_goal": self.steps_to_goal,
            "instability_events": self.instability_events,
            "slip_events": self.slip_events,
        }
        if self.realized.size:
            s["final_state"] = [float(v) for v in self.realized[-1]]
        return s

    def write_csv(self, path) -> None:
        d = self.actions.shape[1] if self.actions.size else 0
        header = (
            ["cycle"]
            + ["x", "y", "yaw", "vx", "vy"]
            + [f"a{i}" for i in range(d)]
            + ["px", "py", "pyaw", "pvx", "pvy"]
            + ["rx", "ry", "ryaw", "rvx", "rvy"]
            + ["cost"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.cycles):
                row = (
                    [i]
                    + [repr(float(v)) for v in self.states[i]]
                    + [repr(float(v)) for v in self.actions[i]]
                    + [repr(float(v)) for v in self.predicted[i]]
                    + [repr(float(v)) for v in self.realized[i]]
                    + [repr(float(self.costs[i]))]
                )
                writer.writerow(row)

    def write_summary(self, path) -> None:
        write_json(path, self.summary())


def at_goal(s: ComState, task: TaskSpec, cfg: PlanConfig) -> bool:
    gx, gy, gyaw = task.goal
    if math.hypot(gx - s.x, gy - s.y) >= cfg.goal_position_tolerance:
        return False
    return abs(wrap_angle(gyaw - s.yaw)) < cfg.goal_yaw_tolerance


def mpc_rollout(
    sim,
    policy,
    model: DynamicsModel,
    task: TaskSpec,
    cfg: PlanConfig | None = None,
    max_cycles: int = 60,
    space=None,
) -> EpisodeLog:
    """Closed-loop planning: each cycle re-plans from the measured state.

    `policy` is anything sim.run_cycle accepts (a trained bundle or the
    command oracle); `space` defaults to the box of the policy's codes.
    Goal tasks stop as soon as the pose is within tolerance; a goal
    already satisfied at the start plans zero cycles.
    """
    cfg = cfg or PlanConfig()
    if space is None:
        space = BoxActionSpace(policy.code_box)
    rng = np.random.default_rng(cfg.seed)
    instab0 = sim.state.instability_events
    slip0 = sim.state.slip_events

    states, actions, predicted, realized, costs = [], [], [], [], []
    reached = False
    for i in range(max_cycles):
        s = ComState.from_tuple(sim.com())
        if task.kind == "goal" and at_goal(s, task, cfg):
            reached = True
            break
        cost_fn = make_cost(task, base_step=i)
        act, _ = random_shooting(model, s, cost_fn, cfg, space, rng)
        z = act[0]
        pred = dyn.predict(model, s, z)
        sim.run_cycle(policy, z)
        s2 = ComState.from_tuple(sim.com())
        states.append(s.as_array())
        actions.append(np.asarray(z, dtype=float))
        predicted.append(pred.as_array())
        realized.append(s2.as_array())
        costs.append(task_cost(s2, task, step_index=i + 1))
    else:
        if task.kind == "goal":
            reached = at_goal(ComState.from_tuple(sim.com()), task, cfg)

    n = len(actions)
    d = actions[0].shape[0] if n else (space.dim if space is not None else 0)
    return EpisodeLog(
        task=task,
        states=np.asarray(states).reshape(n, 5),
        actions=np.asarray(actions).reshape(n, d),
        predicted=np.asarray(predicted).reshape(n, 5),
        realized=np.asarray(realized).reshape(n, 5),
        costs=np.asarray(costs, dtype=float),
        reached=reached,
        steps_to_goal=n if (task.kind == "goal" and reached) else None,
        instability_events=sim.state.instability_events - instab0,
        slip_events=sim.state.slip_events - slip0,
    )


def save_task(path, task: TaskSpec) -> None:
    write_json(path, task.to_dict())


def load_task(path) -> TaskSpec:
    from .util import read_json

    return TaskSpec.from_dict(read_json(path))
