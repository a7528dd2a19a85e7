"""Shared fixtures.

The full artifact pipeline takes around a minute to build, so one desk
pipeline (experts, policy, dynamics, plus both baseline arms) is built per
session and shared read-only by every module that needs trained artifacts.
Tests that need a config variant must copy via ConfigFile.from_dict.
"""

import pytest

from latgait import harness
from latgait.config import ConfigFile
from latgait.expert import sample_expert_library
from latgait.robot import hexapod


@pytest.fixture(scope="session")
def cfg():
    return ConfigFile()


@pytest.fixture(scope="session")
def desk(cfg):
    return harness.build_pipeline(cfg, seed=100, with_lib=True, with_ik=True)


@pytest.fixture(scope="session")
def hexa():
    return hexapod()


@pytest.fixture(scope="session")
def tiny_lib(hexa):
    return sample_expert_library(hexa, 3, seed=5)
