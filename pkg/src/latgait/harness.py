"""Experiment harness: pipeline assembly, evaluation suites, ablations.

Builds the full stack (experts -> policy -> transitions -> dynamics) from
one config and seed, runs planner-vs-baseline suites over task sets with
per-trial derived seeds, sweeps pipeline knobs for ablation tables, and
sets up the disabled-leg adverse comparison.  Every result carries the
config hash and seeds that produced it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dynmod
from . import latent as latmod
from . import planner as planmod
from .config import ConfigFile
from .dynamics import DynamicsModel, TransitionDataset
from .expert import ExpertLibrary, sample_expert_library
from .latent import PolicyBundle
from .planner import (
    BoxActionSpace,
    DiscreteActionSpace,
    IkOraclePolicy,
    TaskSpec,
)
from .robot import RobotModel
from .sim import Simulator
from .util import write_json


def derive_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@dataclass
class Artifacts:
    """Everything one trained pipeline produces."""

    cfg: ConfigFile
    seed: int
    model: RobotModel
    library: ExpertLibrary
    bundle: PolicyBundle
    dataset: TransitionDataset
    dyn_model: DynamicsModel
    lib_dataset: TransitionDataset | None = None
    lib_dyn: DynamicsModel | None = None
    ik_policy: IkOraclePolicy | None = None
    ik_dataset: TransitionDataset | None = None
    ik_dyn: DynamicsModel | None = None


def build_pipeline(
    cfg: ConfigFile, seed: int, with_lib: bool = False, with_ik: bool = False
) -> Artifacts:
    """Train the full stack from scratch, deterministically in (cfg, seed).

    with_lib adds a dynamics model trained over the discrete expert codes;
    with_ik adds the command-oracle controller and its dynamics model.
    """
    seeds = derive_seeds(seed, 8)
    model = cfg.build_robot()
    expert_cfg = cfg.build_expert_cfg()
    library = sample_expert_library(
        model, cfg.expert.count, seeds[0], expert_cfg, cfg.sim
    )
    bundle, _ = latmod.train_joint(
        library, cfg.training.latent_dim, cfg.build_train_hyper(seeds[1])
    )
    sim = Simulator(model=model, cfg=cfg.sim)
    dataset = dynmod.collect_transitions(
        sim,
        bundle,
        cfg.dynamics.samples,
        seeds[2],
        reset_interval=cfg.dynamics.reset_interval,
    )
    dyn_model = dynmod.train_dynamics(dataset, cfg.build_dyn_hyper(seeds[3]))
    art = Artifacts(
        cfg=cfg,
        seed=seed,
        model=model,
        library=library,
        bundle=bundle,
        dataset=dataset,
        dyn_model=dyn_model,
    )
    if with_lib:
        sim.reset()
        art.lib_dataset = dynmod.collect_transitions(
            sim,
            bundle,
            cfg.dynamics.samples,
            seeds[4],
            code_source=bundle.codes,
            reset_interval=cfg.dynamics.reset_interval,
        )
        art.lib_dyn = dynmod.train_dynamics(
            art.lib_dataset, cfg.build_dyn_hyper(seeds[5])
        )
    if with_ik:
        art.ik_policy = planmod.make_ik_oracle(model, expert_cfg)
        sim.reset()
        art.ik_dataset = dynmod.collect_transitions(
            sim,
            art.ik_policy,
            cfg.dynamics.samples,
            seeds[6],
            reset_interval=cfg.dynamics.reset_interval,
        )
        art.ik_dyn = dynmod.train_dynamics(
            art.ik_dataset, cfg.build_dyn_hyper(seeds[7])
        )
    return art


@dataclass
class PlannerSetup:
    """A named (low-level policy, dynamics model, action space) triple."""

    name: str
    policy: object
    model: DynamicsModel
    space: object | None = None


def latent_planner(art: Artifacts, name: str = "lat") -> PlannerSetup:
    return PlannerSetup(
        name=name,
        policy=art.bundle,
        model=art.dyn_model,
        space=BoxActionSpace(art.bundle.code_box),
    )


def library_planner(art: Artifacts, name: str = "lib") -> PlannerSetup:
    if art.lib_dyn is None:
        raise ValueError("pipeline was built without the discrete baseline")
    return PlannerSetup(
        name=name,
        policy=art.bundle,
        model=art.lib_dyn,
        space=DiscreteActionSpace(art.bundle.codes),
    )


def ik_planner(art: Artifacts, name: str = "ik") -> PlannerSetup:
    if art.ik_policy is None or art.ik_dyn is None:
        raise ValueError("pipeline was built without the command oracle")
    return PlannerSetup(
        name=name,
        policy=art.ik_policy,
        model=art.ik_dyn,
        space=BoxActionSpace(art.ik_policy.code_box),
    )


def velocity_tasks(cfg: ConfigFile) -> list[tuple[str, TaskSpec]]:
    """The four axis-aligned targets at the configured speed scale
    (0.2 m/s nominal)."""
    v = 0.2 * cfg.harness.velocity_scale
    return [
        ("vel_left", planmod.velocity_task(0.0, v)),
        ("vel_fwd", planmod.velocity_task(v, 0.0)),
        ("vel_right", planmod.velocity_task(0.0, -v)),
        ("vel_back", planmod.velocity_task(-v, 0.0)),
    ]


def velocity_fan_tasks(cfg: ConfigFile, count: int = 8) -> list[tuple[str, TaskSpec]]:
    """Velocity targets fanned evenly around the circle; probes how much
    of the command space a trained pipeline actually covers."""
    v = 0.2 * cfg.harness.velocity_scale
    out = []
    for k in range(count):
        a = 2.0 * math.pi * k / count
        out.append(
            (f"vel_{k}", planmod.velocity_task(v * math.cos(a), v * math.sin(a)))
        )
    return out


def goal_tasks(cfg: ConfigFile) -> list[tuple[str, TaskSpec]]:
    """Evenly spaced goals on a circle, shared heading."""
    h = cfg.harness
    out = []
    for k in range(h.goal_count):
        a = 2.0 * math.pi * k / h.goal_count
        out.append(
            (
                f"goal_{k}",
                planmod.goal_task(
                    h.goal_radius * math.cos(a),
                    h.goal_radius * math.sin(a),
                    h.goal_heading,
                ),
            )
        )
    return out


def trajectory_tasks(cfg: ConfigFile) -> list[tuple[str, TaskSpec]]:
    h = cfg.harness
    spacing = 0.1 * cfg.harness.velocity_scale
    wps = planmod.s_curve_waypoints(count=h.trajectory_cycles + 1, spacing=spacing)
    return [("s_curve", planmod.trajectory_task(wps))]


def task_max_cycles(cfg: ConfigFile, task: TaskSpec) -> int:
    h = cfg.harness
    if task.kind == "goal":
        return h.goal_max_cycles
    if task.kind == "trajectory":
        return h.trajectory_cycles
    return h.velocity_cycles


@dataclass
class SuiteResult:
    """Per-planner, per-task metric lists over trials, plus provenance."""

    results: dict
    seed: int
    trials: int
    config_hash: str

    def mean_cost(self, planner: str, task: str | None = None) -> float:
        r = self.results[planner]
        if task is not None:
            return float(np.mean(r[task]["costs"]))
        return float(np.mean([np.mean(v["costs"]) for v in r.values()]))

    def to_dict(self) -> dict:
        return {
            "kind": "suite_result",
            "seed": self.seed,
            "trials": self.trials,
            "config_hash": self.config_hash,
            "results": self.results,
        }

    def write_json(self, path) -> None:
        write_json(path, self.to_dict())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["planner", "task", "trial", "cost", "reached", "steps"]
            )
            for pname, tasks in self.results.items():
                for tname, rec in tasks.items():
                    for i in range(len(rec["costs"])):
                        writer.writerow(
                            [
                                pname,
                                tname,
                                i,
                                repr(rec["costs"][i]),
                                int(rec["reached"][i]),
                                rec["steps"][i] if rec["steps"][i] is not None else "",
                            ]
                        )


def run_suite(
    planners: list[PlannerSetup],
    tasks: list[tuple[str, TaskSpec]],
    cfg: ConfigFile,
    trials: int | None = None,
    seed: int = 0,
    model: RobotModel | None = None,
) -> SuiteResult:
    """Evaluate every planner on every task over per-trial derived seeds.

    Trials share artifacts and differ in planner/simulator seeds; each
    (task, trial) pair uses the same seed for every planner, so
    comparisons are paired.
    """
    trials = trials if trials is not None else cfg.harness.trials
    model = model or cfg.build_robot()
    trial_seeds = derive_seeds(seed, max(trials * len(tasks), 1))
    results: dict = {}
    for p in planners:
        pres: dict = {}
        for ti, (tname, task) in enumerate(tasks):
            rec = {"costs": [], "reached": [], "steps": []}
            for r in range(trials):
                s = trial_seeds[ti * trials + r]
                sim = Simulator(model=model, cfg=cfg.sim, seed=s)
                plan_cfg = cfg.build_plan_cfg(s)
                log = planmod.mpc_rollout(
                    sim,
                    p.policy,
                    p.model,
                    task,
                    plan_cfg,
                    max_cycles=task_max_cycles(cfg, task),
                    space=p.space,
                )
                rec["costs"].append(log.mean_step_cost)
                rec["reached"].append(bool(log.reached))
                rec["steps"].append(log.steps_to_goal)
            pres[tname] = rec
        results[p.name] = pres
    return SuiteResult(
        results=results,
        seed=seed,
        trials=trials,
        config_hash=cfg.content_hash(),
    )


@dataclass
class GaitPattern:
    """Stance matrix and summary statistics extracted from rollout logs."""

    stance: np.ndarray
    duty_factors: np.ndarray
    dominant_per_cycle: list[int]
    changes: list[bool]

    @property
    def gait_changed(self) -> bool:
        return any(self.changes)


def extract_gait_pattern(
    stance_masks: np.ndarray, leg_count: int, cycle_steps: int
) -> GaitPattern:
    """Unpack per-step stance bitmasks into a legs x steps matrix.

    Duty factor is each leg's stance fraction; the dominant pattern of a
    cycle is its most frequent bitmask (ties to the smaller mask), and
    `changes` flags cycle boundaries where the dominant pattern differs.
    """
    masks = np.asarray(stance_masks, dtype=np.int64).ravel()
    T = masks.shape[0]
    stance = np.zeros((leg_count, T), dtype=np.uint8)
    for leg in range(leg_count):
        stance[leg] = (masks >> leg) & 1
    duty = stance.mean(axis=1)
    dominant = []
    n_cycles = T // cycle_steps if cycle_steps > 0 else 0
    for c in range(n_cycles):
        chunk = masks[c * cycle_steps : (c + 1) * cycle_steps]
        vals, counts = np.unique(chunk, return_counts=True)
        dominant.append(int(vals[np.argmax(counts)]))
    changes = [dominant[i] != dominant[i - 1] for i in range(1, len(dominant))]
    return GaitPattern(
        stance=stance,
        duty_factors=duty,
        dominant_per_cycle=dominant,
        changes=changes,
    )


@dataclass
class AblationResult:
    sweep: str
    values: list
    per_value: dict
    seed: int
    trials: int
    config_hash: str

    def mean_overall(self, value) -> float:
        return float(np.mean(self.per_value[str(value)]["overall"]))

    def to_dict(self) -> dict:
        return {
            "kind": "ablation_result",
            "sweep": self.sweep,
            "values": self.values,
            "seed": self.seed,
            "trials": self.trials,
            "config_hash": self.config_hash,
            "per_value": self.per_value,
        }

    def write_json(self, path) -> None:
        write_json(path, self.to_dict())


_SWEEPS = ("dyn_samples", "expert_count", "latent_dim")


def _apply_sweep(cfg: ConfigFile, sweep: str, value) -> ConfigFile:
    d = ConfigFile.from_dict(cfg.to_dict())
    if sweep == "dyn_samples":
        d.dynamics.samples = int(value)
    elif sweep == "expert_count":
        d.expert.count = int(value)
    elif sweep == "latent_dim":
        d.training.latent_dim = int(value)
    else:
        raise ValueError(f"unknown sweep {sweep!r}; expected one of {_SWEEPS}")
    return d


def run_ablation(
    cfg: ConfigFile,
    sweep: str,
    values: list,
    trials: int | None = None,
    seed: int = 0,
    eval_tasks: list[tuple[str, TaskSpec]] | None = None,
) -> AblationResult:
    """Retrain the pipeline per (value, trial) and evaluate a task mix.

    Each trial uses a fresh derived seed shared across values, so value
    comparisons are paired over the same seeds.
    """
    trials = trials if trials is not None else cfg.harness.trials
    if eval_tasks is None:
        # directional coverage dominates the sweeps of interest; goal
        # episodes are left out because their mean step cost is mostly the
        # distance integral, which buries pipeline-quality differences
        eval_tasks = velocity_fan_tasks(cfg) + trajectory_tasks(cfg)
    trial_seeds = derive_seeds(seed, trials)
    per_value: dict = {}
    for value in values:
        vcfg = _apply_sweep(cfg, sweep, value)
        task_costs: dict = {name: [] for name, _ in eval_tasks}
        overall = []
        for r in range(trials):
            art = build_pipeline(vcfg, trial_seeds[r])
            suite = run_suite(
                [latent_planner(art)],
                eval_tasks,
                vcfg,
                trials=1,
                seed=trial_seeds[r],
                model=art.model,
            )
            costs = [
                suite.results["lat"][name]["costs"][0] for name, _ in eval_tasks
            ]
            for (name, _), c in zip(eval_tasks, costs):
                task_costs[name].append(c)
            overall.append(float(np.mean(costs)))
        per_value[str(value)] = {"tasks": task_costs, "overall": overall}
    return AblationResult(
        sweep=sweep,
        values=list(values),
        per_value=per_value,
        seed=seed,
        trials=trials,
        config_hash=cfg.content_hash(),
    )


@dataclass
class AdverseResult:
    """Velocity-suite costs on the damaged robot for three planners:
    latent with re-collected dynamics, latent with the stale intact-robot
    dynamics, and the command oracle re-collected on the damaged robot."""

    per_seed: dict
    disabled_legs: tuple[int, ...]
    seed: int
    config_hash: str

    def mean(self, planner: str) -> float:
        return float(np.mean([v[planner] for v in self.per_seed.values()]))

    def to_dict(self) -> dict:
        return {
            "kind": "adverse_result",
            "disabled_legs": list(self.disabled_legs),
            "seed": self.seed,
            "config_hash": self.config_hash,
            "per_seed": self.per_seed,
        }

    def write_json(self, path) -> None:
        write_json(path, self.to_dict())


def adverse_setting(
    cfg: ConfigFile,
    art: Artifacts,
    seeds: list[int],
    disabled_legs: tuple[int, ...] = (2, 3),
) -> AdverseResult:
    """Disable legs and compare adaptation strategies on velocity tasks.

    Per seed: re-collect transitions and retrain dynamics on the damaged
    robot for both the latent policy and the command oracle, then run the
    velocity suite for (lat re-learned, lat stale, ik re-learned).  The
    low-level controllers are never retrained; only the dynamics models
    change.
    """
    damaged = art.model.with_disabled_legs(disabled_legs)
    expert_cfg = cfg.build_expert_cfg()
    ik_policy = art.ik_policy or planmod.make_ik_oracle(art.model, expert_cfg)
    tasks = velocity_tasks(cfg)
    per_seed: dict = {}
    for s in seeds:
        sub = derive_seeds(s, 4)
        sim = Simulator(model=damaged, cfg=cfg.sim, seed=sub[0])
        ds_lat = dynmod.collect_transitions(
            sim,
            art.bundle,
            cfg.dynamics.samples,
            sub[0],
            reset_interval=cfg.dynamics.reset_interval,
        )
        dyn_fresh = dynmod.train_dynamics(ds_lat, cfg.build_dyn_hyper(sub[1]))
        sim.reset()
        ds_ik = dynmod.collect_transitions(
            sim,
            ik_policy,
            cfg.dynamics.samples,
            sub[2],
            reset_interval=cfg.dynamics.reset_interval,
        )
        dyn_ik = dynmod.train_dynamics(ds_ik, cfg.build_dyn_hyper(sub[3]))
        planners = [
            PlannerSetup(
                "lat_fresh",
                art.bundle,
                dyn_fresh,
                BoxActionSpace(art.bundle.code_box),
            ),
            PlannerSetup(
                "lat_stale",
                art.bundle,
                art.dyn_model,
                BoxActionSpace(art.bundle.code_box),
            ),
            PlannerSetup(
                "ik_fresh", ik_policy, dyn_ik, BoxActionSpace(ik_policy.code_box)
            ),
        ]
        suite = run_suite(
            planners, tasks, cfg, trials=1, seed=s, model=damaged
        )
        per_seed[str(s)] = {
            p.name: suite.mean_cost(p.name) for p in planners
        }
    return AdverseResult(
        per_seed=per_seed,
        disabled_legs=tuple(disabled_legs),
        seed=seeds[0] if seeds else 0,
        config_hash=cfg.content_hash(),
    )
