"""Equivalence of the compiled stepping kernel and its pure-Python twin.

The two kernels must produce bit-identical logs for an identical noisy
workload, and the LATGAIT_PURE_PY environment switch must force the
fallback at import time.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from latgait import simcore
from latgait.expert import ComCommand, ExpertConfig, expert_angle_rows
from latgait.robot import hexapod
from latgait.sim import SimConfig, _disabled_vector, make_state


def build_workload(model, cycles, seed):
    cfg = ExpertConfig()
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(cycles):
        cmd = ComCommand(
            dx=float(rng.uniform(-0.08, 0.08)),
            dy=float(rng.uniform(-0.08, 0.08)),
            dyaw=float(rng.uniform(-0.2, 0.2)),
        )
        rows, _ = expert_angle_rows(model, cmd, cfg)
        blocks.append(rows.reshape(cfg.cycle_steps, model.leg_count, 3))
    return np.ascontiguousarray(np.concatenate(blocks, axis=0))


def run_kernel(kernel, model, cfg, qdes, noise):
    state = make_state(model, cfg, seed=0)
    n = qdes.shape[0]
    L = model.leg_count
    log_pose = np.empty((n, 3))
    log_vel = np.empty((n, 2))
    log_stance = np.empty(n, dtype=np.int64)
    log_q = np.empty((n, L, 3))
    links = np.array([*model.link_lengths, model.nominal_height])
    kernel(
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
        qdes,
        noise,
        log_pose,
        log_vel,
        log_stance,
        log_q,
    )
    return log_pose, log_vel, log_stance, log_q, state.pose.copy()


def test_kernel_twins_bit_identical_under_noise():
    variants = simcore.kernel_variants()
    if "compiled" not in variants:
        pytest.skip("compiled kernel not importable in this environment")
    assert set(variants) == {"python", "compiled"}

    model = hexapod()
    cfg = SimConfig(registration_noise_std=0.002)
    qdes = build_workload(model, cycles=6, seed=0)
    noise = (
        np.random.default_rng(0).standard_normal((qdes.shape[0], 3))
        * cfg.registration_noise_std
    )

    out_py = run_kernel(variants["python"], model, cfg, qdes, noise)
    out_c = run_kernel(variants["compiled"], model, cfg, qdes, noise)
    for a, b in zip(out_py, out_c):
        assert np.array_equal(a, b)


def test_kernel_twins_bit_identical_with_disabled_legs():
    variants = simcore.kernel_variants()
    if "compiled" not in variants:
        pytest.skip("compiled kernel not importable in this environment")

    model = hexapod(disabled_legs=(2, 3))
    cfg = SimConfig()
    qdes = build_workload(model, cycles=4, seed=1)
    noise = np.zeros((qdes.shape[0], 3))

    out_py = run_kernel(variants["python"], model, cfg, qdes, noise)
    out_c = run_kernel(variants["compiled"], model, cfg, qdes, noise)
    for a, b in zip(out_py, out_c):
        assert np.array_equal(a, b)


def test_pure_py_env_forces_fallback():
    proc = subprocess.run(
        [
            sys.executable,
            "-c",
            "from latgait import simcore; print(simcore.KERNEL_NAME)",
        ],
        capture_output=True,
        text=True,
        env=dict(os.environ, LATGAIT_PURE_PY="1"),
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "python"
