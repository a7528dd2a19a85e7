"""Command-line pipeline driver.

One binary with subcommands, one stage per command, file-based handoff:

    latgait gen-experts  --count 8 --seed 7 --out experts.json
    latgait train-latent --experts experts.json --latent-dim 2 --out policy.json
    latgait collect-dyn  --policy policy.json --samples 2000 --out trans.csv
    latgait train-dyn    --data trans.csv --out dyn.json
    latgait run --task goal --policy policy.json --dyn dyn.json --out results/
    latgait check

Every artifact embeds the config hash and the hashes of its upstream
artifacts; `run` refuses chains that do not line up.  All commands are
deterministic given flags plus seed and never modify an input file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import checks as checkmod
from . import dynamics as dyn
from . import harness
from .config import ENV_CONFIG, ConfigFile, load_config
from .dynamics import collect_transitions, read_dataset_csv, write_dataset_csv
from .errors import ArtifactMismatch, DimensionMismatch
from .expert import ExpertLibrary, sample_expert_library
from .latent import PolicyBundle, train_joint
from .planner import BoxActionSpace, DiscreteActionSpace, make_ik_oracle, mpc_rollout
from .sim import Simulator
from .util import read_json, write_json

# hind pair frozen in the damaged-robot experiments
ADVERSE_LEGS = (2, 3)

_pool_limiter = None


def _limit_threads(n: int | None) -> None:
    """Cap BLAS worker threads; silently best-effort without threadpoolctl."""
    if n is None or n < 1:
        return
    global _pool_limiter
    try:
        import threadpoolctl
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))
        return
    _pool_limiter = threadpoolctl.threadpool_limits(limits=n)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _write_artifact(path: str, payload: dict, cfg: ConfigFile) -> None:
    payload = dict(payload)
    payload["config_hash"] = cfg.content_hash()
    write_json(path, payload)


def _load_bundle(path: str) -> PolicyBundle:
    return PolicyBundle.from_dict(read_json(path))


def _load_dyn(path: str) -> dyn.DynamicsModel:
    return dyn.DynamicsModel.from_dict(read_json(path))


def cmd_gen_experts(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    count = args.count if args.count is not None else cfg.expert.count
    if count < 1:
        raise ValueError("expert count must be positive")
    robot = cfg.build_robot()
    library = sample_expert_library(
        robot, count, args.seed, cfg.build_expert_cfg(), cfg.sim
    )
    _write_artifact(args.out, library.to_dict(), cfg)
    b = cfg.expert
    print(
        f"experts: {count} trajectories of {b.cycle_steps} steps, "
        f"bounds step<={b.max_step} yaw<={b.max_yaw}"
    )
    print(f"clamp events: {int(library.clamp_events.sum())}")
    print(f"hash: {library.content_hash()}")
    print(f"wrote {args.out}")
    return 0


def cmd_train_latent(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    library = ExpertLibrary.from_dict(read_json(args.experts))
    latent_dim = (
        args.latent_dim if args.latent_dim is not None else cfg.training.latent_dim
    )
    hyper = cfg.build_train_hyper(args.seed)
    if args.epochs is not None:
        hyper = replace(hyper, epochs=args.epochs)
    bundle, history = train_joint(library, latent_dim, hyper)
    _write_artifact(args.out, bundle.to_dict(), cfg)

    loss_path = os.path.splitext(args.out)[0] + ".loss.csv"
    with open(loss_path, "w") as fh:
        fh.write("epoch,total_loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v!r}\n")

    ratio = history[-1] / history[0] if history[0] > 0 else 0.0
    print(f"trained D={latent_dim} on {library.size} experts, {hyper.epochs} epochs")
    print(f"loss: {history[0]:.4f} -> {history[-1]:.4f} (ratio {ratio:.2e})")
    print(f"hash: {bundle.content_hash()}")
    print(f"wrote {args.out} and {loss_path}")
    return 0


def cmd_collect_dyn(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    robot = cfg.build_robot()
    if args.ik:
        policy = make_ik_oracle(robot, cfg.build_expert_cfg())
        if args.discrete:
            raise ValueError("--discrete needs a trained policy, not --ik")
    else:
        if not args.policy:
            raise ValueError("either --policy or --ik is required")
        policy = _load_bundle(args.policy)
        if policy.model_hash != robot.geometry_hash():
            raise ArtifactMismatch(
                "policy was trained for a different robot geometry"
            )
    run_robot = robot.with_disabled_legs(ADVERSE_LEGS) if args.adverse else robot
    sim = Simulator(run_robot, cfg.sim, seed=args.seed)
    code_source = policy.codes if args.discrete else None
    dataset = collect_transitions(
        sim,
        policy,
        args.samples,
        args.seed,
        code_source=code_source,
        reset_interval=cfg.dynamics.reset_interval,
    )
    dataset.meta["config_hash"] = cfg.content_hash()
    dataset.meta["robot_hash"] = run_robot.geometry_hash()
    dataset.meta["adverse"] = bool(args.adverse)
    write_dataset_csv(args.out, dataset)
    print(
        f"collected {dataset.size} transitions "
        f"(action space: {dataset.meta['action_space']}, adverse: {args.adverse})"
    )
    print(f"wrote {args.out} and {args.out}.meta.json")
    return 0


def cmd_train_dyn(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = read_dataset_csv(args.data)
    model = dyn.train_dynamics(dataset, cfg.build_dyn_hyper(args.seed))
    _write_artifact(args.out, model.to_dict(), cfg)
    print(f"trained on {dataset.size} transitions, D={dataset.latent_dim}")
    print(f"standardized mse: train {model.train_mse:.5f}, holdout {model.holdout_mse:.5f}")
    print(f"hash: {model.content_hash()}")
    print(f"wrote {args.out}")
    return 0


def _check_chain(policy, model: dyn.DynamicsModel, runtime_hash: str) -> None:
    """Refuse planner runs whose artifacts disagree, before any rollout."""
    if policy.latent_dim != model.latent_dim:
        raise DimensionMismatch(
            f"policy D={policy.latent_dim} but dynamics D={model.latent_dim}"
        )
    recorded = model.meta.get("policy_hash")
    if recorded is not None and recorded != policy.content_hash():
        raise ArtifactMismatch(
            "dynamics model was collected under a different policy"
        )
    data_robot = model.meta.get("robot_hash")
    if data_robot is not None and data_robot != runtime_hash:
        # legitimate for the stale-dynamics experiment, so only a notice
        print(
            "note: dynamics data came from a different robot geometry "
            "(stale-dynamics configuration)",
            file=sys.stderr,
        )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    intact = cfg.build_robot()
    runtime = intact.with_disabled_legs(ADVERSE_LEGS) if args.adverse else intact

    model = _load_dyn(args.dyn)
    if args.baseline == "ik":
        policy = make_ik_oracle(intact, cfg.build_expert_cfg())
        space = BoxActionSpace(policy.code_box)
    else:
        if not args.policy:
            raise ValueError(f"--policy is required for baseline {args.baseline!r}")
        bundle = _load_bundle(args.policy)
        if bundle.model_hash != intact.geometry_hash():
            raise ArtifactMismatch(
                "policy was trained for a different robot geometry"
            )
        policy = bundle
        if args.baseline == "lib":
            space = DiscreteActionSpace(bundle.codes)
        else:
            space = BoxActionSpace(bundle.code_box)
    _check_chain(policy, model, runtime.geometry_hash())

    if args.task == "velocity":
        tasks = harness.velocity_tasks(cfg)
    elif args.task == "goal":
        tasks = harness.goal_tasks(cfg)
    else:
        tasks = harness.trajectory_tasks(cfg)

    os.makedirs(args.out, exist_ok=True)
    seeds = harness.derive_seeds(args.seed, 2 * len(tasks))
    episodes = []
    for i, (name, task) in enumerate(tasks):
        sim = Simulator(runtime, cfg.sim, seed=seeds[2 * i])
        plan_cfg = cfg.build_plan_cfg(seeds[2 * i + 1])
        log = mpc_rollout(
            sim,
            policy,
            model,
            task,
            plan_cfg,
            max_cycles=harness.task_max_cycles(cfg, task),
            space=space,
        )
        log.write_csv(os.path.join(args.out, f"{name}.csv"))
        episodes.append({"name": name, **log.summary()})
        line = f"{name}: {log.cycles} cycles, mean step cost {log.mean_step_cost:.4f}"
        if task.kind == "goal":
            line += f", reached={log.reached}, steps={log.steps_to_goal}"
        print(line)

    metrics = {
        "task": args.task,
        "baseline": args.baseline,
        "adverse": bool(args.adverse),
        "seed": args.seed,
        "config_hash": cfg.content_hash(),
        "policy_hash": policy.content_hash(),
        "dynamics_hash": model.content_hash(),
        "mean_step_cost": float(
            np.mean([e["mean_step_cost"] for e in episodes])
        ),
        "episodes": episodes,
    }
    metrics_path = os.path.join(args.out, "metrics.json")
    write_json(metrics_path, metrics)
    print(f"mean step cost over tasks: {metrics['mean_step_cost']:.4f}")
    print(f"wrote {metrics_path}")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    picked = [
        name
        for name in checkmod.ALL_CHECKS
        if getattr(args, name.replace("-", "_"))
    ]
    if not picked:
        picked = list(checkmod.ALL_CHECKS)
    reports = [checkmod.ALL_CHECKS[name]() for name in picked]
    passed = all(r["passed"] for r in reports)
    doc = {"checks": reports, "passed": passed}
    text = json.dumps(doc, indent=2, default=float)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0 if passed else 1


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="latgait",
        description="latent-gait planning pipeline",
    )
    top.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count(),
        help="cap for BLAS worker threads (default: all processors)",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--config",
            default=None,
            help=f"config JSON (default: ${ENV_CONFIG} or built-in defaults)",
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)

    p = sub.add_parser("gen-experts", help="sample a cyclic gait library")
    common(p)
    p.add_argument("--count", type=_positive_int, default=None)
    p.set_defaults(func=cmd_gen_experts)

    p = sub.add_parser("train-latent", help="fit the phase policy and codes")
    common(p)
    p.add_argument("--experts", required=True)
    p.add_argument("--latent-dim", type=_positive_int, default=None)
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.set_defaults(func=cmd_train_latent)

    p = sub.add_parser("collect-dyn", help="roll random codes, record deltas")
    common(p)
    p.add_argument("--policy", default=None)
    p.add_argument("--samples", type=_positive_int, default=2000)
    p.add_argument(
        "--discrete",
        action="store_true",
        help="draw codes from the trained library instead of the box",
    )
    p.add_argument(
        "--ik",
        action="store_true",
        help="use the scripted command controller instead of a trained policy",
    )
    p.add_argument(
        "--adverse",
        action="store_true",
        help=f"freeze legs {ADVERSE_LEGS} at nominal angles",
    )
    p.set_defaults(func=cmd_collect_dyn)

    p = sub.add_parser("train-dyn", help="fit the one-cycle delta model")
    common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_train_dyn)

    p = sub.add_parser("run", help="closed-loop planning on a task set")
    common(p)
    p.add_argument("--task", choices=("velocity", "goal", "traj"), required=True)
    p.add_argument("--policy", default=None)
    p.add_argument("--dyn", required=True)
    p.add_argument("--baseline", choices=("none", "lib", "ik"), default="none")
    p.add_argument(
        "--adverse",
        action="store_true",
        help=f"freeze legs {ADVERSE_LEGS} at nominal angles",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="run the self-check suites")
    p.add_argument("--gradients", action="store_true")
    p.add_argument("--registration", action="store_true")
    p.add_argument("--roundtrip", action="store_true")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_check)

    return top


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _limit_threads(args.threads)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
