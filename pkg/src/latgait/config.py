"""Configuration file handling.

One JSON file configures the whole pipeline, section by section.  Unknown
sections or keys are rejected loudly (a typo must not silently fall back
to a default).  The canonical hash of a config ties artifacts to the
settings that produced them.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields

from .dynamics import DynTrainHyper
from .errors import MissingModel
from .expert import CommandBounds, ExpertConfig
from .latent import TrainHyper
from .planner import PlanConfig
from .robot import RobotModel, hexapod, quadruped
from .sim import SimConfig
from .util import payload_hash, read_json, write_json

ENV_CONFIG = "LATGAIT_CONFIG"


@dataclass
class RobotSection:
    morphology: str = "hexapod"
    hip_radius: float = 0.55
    body_length: float = 0.5
    body_width: float = 0.3
    link_lengths: tuple[float, float, float] = (0.1, 0.3, 0.3)
    nominal_height: float = 0.25
    joint_limit: float = 1.57
    nominal_radial_offset: float = 0.5
    disabled_legs: tuple[int, ...] = ()


@dataclass
class ExpertSection:
    cycle_steps: int = 100
    max_step: float = 0.15
    max_yaw: float = 0.3
    swing_clearance: float = 0.04
    count: int = 8


@dataclass
class TrainingSection:
    latent_dim: int = 2
    lr: float = 1e-3
    batch: int = 128
    epochs: int = 2000
    hidden: tuple[int, ...] = (64, 64)
    z_init_std: float = 0.1
    code_box_margin: float = 0.25


@dataclass
class DynamicsSection:
    samples: int = 2000
    reset_interval: int = 25
    lr: float = 1e-3
    batch: int = 512
    epochs: int = 400
    hidden: tuple[int, ...] = (64, 64)
    holdout_fraction: float = 0.1


@dataclass
class PlannerSection:
    samples: int = 8000
    horizon: int = 1
    goal_position_tolerance: float = 0.1
    goal_yaw_tolerance: float = 0.2


@dataclass
class HarnessSection:
    trials: int = 10
    velocity_scale: float = 0.5
    goal_radius: float = 1.0
    goal_heading: float = math.pi / 2.0
    goal_count: int = 8
    goal_max_cycles: int = 60
    velocity_cycles: int = 15
    trajectory_cycles: int = 20


_SECTION_TYPES = {
    "robot": RobotSection,
    "sim": SimConfig,
    "expert": ExpertSection,
    "training": TrainingSection,
    "dynamics": DynamicsSection,
    "planner": PlannerSection,
    "harness": HarnessSection,
}

_TUPLE_FIELDS = {"link_lengths", "disabled_legs", "hidden"}


@dataclass
class ConfigFile:
    robot: RobotSection = field(default_factory=RobotSection)
    sim: SimConfig = field(default_factory=SimConfig)
    expert: ExpertSection = field(default_factory=ExpertSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    planner: PlannerSection = field(default_factory=PlannerSection)
    harness: HarnessSection = field(default_factory=HarnessSection)

    def to_dict(self) -> dict:
        out: dict = {}
        for name, _ in _SECTION_TYPES.items():
            section = getattr(self, name)
            sec: dict = {}
            for f in fields(section):
                v = getattr(section, f.name)
                sec[f.name] = list(v) if isinstance(v, tuple) else v
            out[name] = sec
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConfigFile":
        unknown = set(d) - set(_SECTION_TYPES)
        if unknown:
            raise KeyError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, typ in _SECTION_TYPES.items():
            src = d.get(name, {})
            allowed = {f.name for f in fields(typ)}
            bad = set(src) - allowed
            if bad:
                raise KeyError(f"unknown keys in [{name}]: {sorted(bad)}")
            vals = {
                k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
                for k, v in src.items()
            }
            kwargs[name] = typ(**vals)
        return cls(**kwargs)

    def content_hash(self) -> str:
        return payload_hash(self.to_dict())

    # section -> runtime objects

    def build_robot(self) -> RobotModel:
        r = self.robot
        if r.morphology == "hexapod":
            return hexapod(
                hip_radius=r.hip_radius,
                link_lengths=r.link_lengths,
                nominal_height=r.nominal_height,
                joint_limit=r.joint_limit,
                nominal_radial_offset=r.nominal_radial_offset,
                disabled_legs=tuple(r.disabled_legs),
            )
        if r.morphology == "quadruped":
            return quadruped(
                body_length=r.body_length,
                body_width=r.body_width,
                link_lengths=r.link_lengths,
                nominal_height=r.nominal_height,
                joint_limit=r.joint_limit,
                nominal_radial_offset=r.nominal_radial_offset,
                disabled_legs=tuple(r.disabled_legs),
            )
        raise MissingModel(f"unknown morphology {r.morphology!r}")

    def build_expert_cfg(self) -> ExpertConfig:
        e = self.expert
        return ExpertConfig(
            cycle_steps=e.cycle_steps,
            swing_clearance=e.swing_clearance,
            bounds=CommandBounds(max_step=e.max_step, max_yaw=e.max_yaw),
        )

    def build_train_hyper(self, seed: int) -> TrainHyper:
        t = self.training
        return TrainHyper(
            lr=t.lr,
            batch=t.batch,
            epochs=t.epochs,
            seed=seed,
            hidden=tuple(t.hidden),
            z_init_std=t.z_init_std,
            code_box_margin=t.code_box_margin,
        )

    def build_dyn_hyper(self, seed: int) -> DynTrainHyper:
        d = self.dynamics
        return DynTrainHyper(
            lr=d.lr,
            batch=d.batch,
            epochs=d.epochs,
            seed=seed,
            hidden=tuple(d.hidden),
            holdout_fraction=d.holdout_fraction,
        )

    def build_plan_cfg(self, seed: int) -> PlanConfig:
        p = self.planner
        return PlanConfig(
            samples=p.samples,
            horizon=p.horizon,
            seed=seed,
            goal_position_tolerance=p.goal_position_tolerance,
            goal_yaw_tolerance=p.goal_yaw_tolerance,
        )


def full_scale_profile(cfg: ConfigFile | None = None) -> ConfigFile:
    """Full-scale experiment settings: more experts, wider nets, more data.
    Everything else (robot, simulator, planner) stays as configured."""
    cfg = cfg or ConfigFile()
    cfg.expert.count = 50
    cfg.training.hidden = (512, 512)
    cfg.training.epochs = 10000
    cfg.dynamics.samples = 10000
    cfg.dynamics.hidden = (128, 128)
    cfg.harness.velocity_scale = 1.0
    return cfg


def load_config(path: str | None = None) -> ConfigFile:
    """Load a config file, falling back to $LATGAIT_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return ConfigFile()
    return ConfigFile.from_dict(read_json(path))


def save_config(path, cfg: ConfigFile) -> None:
    write_json(path, cfg.to_dict())
