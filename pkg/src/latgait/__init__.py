"""Latent-gait locomotion planning toolkit.

A two-level controller for simulated legged robots: a phase policy maps a
low-dimensional latent code to joint angles over one gait cycle, a learned
delta model predicts the per-cycle center-of-mass motion each code causes,
and a random-shooting planner picks codes cycle by cycle.  Includes the
cyclic-gait generator the policy imitates, a deterministic kinematic
simulator to run everything in, discrete-library and command-oracle planner
baselines, and a command-line pipeline.
"""

from .config import ConfigFile, load_config, save_config
from .robot import RobotModel, hexapod, quadruped
from .sim import SimConfig, Simulator

__version__ = "0.1.0"

__all__ = [
    "ConfigFile",
    "RobotModel",
    "SimConfig",
    "Simulator",
    "hexapod",
    "load_config",
    "quadruped",
    "save_config",
    "__version__",
]
