"""Times the compiled stepping kernel against its pure-Python twin.

Both kernels run the identical workload from identical initial state; the
script verifies bit-equality of every logged quantity before reporting
throughput, so a speedup is only printed for outputs that agree exactly.

    python3 benchmarks/bench_kernels.py --cycles 20 --repeats 5
"""

import argparse
import time

import numpy as np

from latgait import simcore
from latgait.expert import ComCommand, ExpertConfig, expert_angle_rows
from latgait.robot import hexapod
from latgait.sim import SimConfig, make_state, _disabled_vector


def build_workload(model, cycles: int, seed: int) -> np.ndarray:
    """Commanded angle rows for `cycles` gait cycles of varied commands."""
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


def run_once(kernel, model, cfg, qdes, noise):
    state = make_state(model, cfg, seed=0)
    n = qdes.shape[0]
    L = model.leg_count
    log_pose = np.empty((n, 3))
    log_vel = np.empty((n, 2))
    log_stance = np.empty(n, dtype=np.int64)
    log_q = np.empty((n, L, 3))
    links = np.array([*model.link_lengths, model.nominal_height])
    t0 = time.perf_counter()
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
    elapsed = time.perf_counter() - t0
    return elapsed, (log_pose, log_vel, log_stance, log_q, state.pose.copy())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cycles", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = hexapod()
    cfg = SimConfig(registration_noise_std=0.002)
    qdes = build_workload(model, args.cycles, args.seed)
    n = qdes.shape[0]
    # identical noise for both kernels so outputs must match bitwise
    noise = (
        np.random.default_rng(args.seed).standard_normal((n, 3))
        * cfg.registration_noise_std
    )

    variants = simcore.kernel_variants()
    print(f"kernels available: {', '.join(sorted(variants))}")
    print(f"workload: {n} steps ({args.cycles} cycles), {args.repeats} repeats")

    results = {}
    outputs = {}
    for name, kernel in sorted(variants.items()):
        best = float("inf")
        for _ in range(args.repeats):
            elapsed, out = run_once(kernel, model, cfg, qdes, noise)
            best = min(best, elapsed)
        results[name] = best
        outputs[name] = out
        print(f"{name:>10}: {n / best:12.0f} steps/s  (best of {args.repeats}: {best * 1e3:.2f} ms)")

    if len(outputs) == 2:
        a, b = (outputs[k] for k in sorted(outputs))
        exact = all(np.array_equal(x, y) for x, y in zip(a, b))
        print(f"bit-identical outputs: {exact}")
        if not exact:
            return 1
        slow = max(results.values())
        fast = min(results.values())
        print(f"speedup: {slow / fast:.1f}x")
    else:
        print("only one kernel importable; no comparison")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
