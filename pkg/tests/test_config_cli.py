"""Config file handling and the command-line pipeline.

Config tests exercise the section/key validation and the publication
profile in-process.  CLI tests drive `python -m latgait` as a subprocess
over a small artifact chain (3 experts, short training) built once per
module in a temp directory, with the config supplied through the
LATGAIT_CONFIG environment variable.
"""

import json
import math
import os
import subprocess
import sys

import pytest

from latgait.config import ConfigFile, full_scale_profile, load_config, save_config


def test_defaults_round_trip():
    cfg = ConfigFile()
    clone = ConfigFile.from_dict(cfg.to_dict())
    assert clone.to_dict() == cfg.to_dict()
    assert clone.content_hash() == cfg.content_hash()
    assert cfg.training.latent_dim == 2
    assert cfg.planner.samples == 8000
    assert cfg.sim.dt == 0.01
    assert cfg.harness.velocity_scale == 0.5


def test_unknown_section_rejected():
    with pytest.raises(KeyError, match="robo_typo"):
        ConfigFile.from_dict({"robo_typo": {}})


def test_unknown_key_rejected():
    with pytest.raises(KeyError, match="hip_radiu"):
        ConfigFile.from_dict({"robot": {"hip_radiu": 0.6}})


def test_tuple_fields_from_lists():
    cfg = ConfigFile.from_dict(
        {
            "robot": {"link_lengths": [0.1, 0.25, 0.35], "disabled_legs": [2, 3]},
            "training": {"hidden": [32, 32, 32]},
        }
    )
    assert cfg.robot.link_lengths == (0.1, 0.25, 0.35)
    assert cfg.robot.disabled_legs == (2, 3)
    assert cfg.training.hidden == (32, 32, 32)
    d = cfg.to_dict()
    assert d["robot"]["link_lengths"] == [0.1, 0.25, 0.35]
    assert d["training"]["hidden"] == [32, 32, 32]


def test_full_scale_profile_values():
    cfg = full_scale_profile()
    assert cfg.expert.count == 50
    assert cfg.training.hidden == (512, 512)
    assert cfg.training.epochs == 10000
    assert cfg.dynamics.samples == 10000
    assert cfg.dynamics.hidden == (128, 128)
    assert cfg.harness.velocity_scale == 1.0
    # untouched sections keep desk defaults
    assert cfg.planner.samples == 8000
    assert cfg.sim.dt == 0.01


def test_content_hash_tracks_changes():
    a = ConfigFile()
    b = ConfigFile()
    b.dynamics.samples = 2001
    assert a.content_hash() != b.content_hash()


def test_save_load_round_trip(tmp_path, monkeypatch):
    cfg = ConfigFile()
    cfg.expert.count = 5
    path = tmp_path / "cfg.json"
    save_config(path, cfg)

    loaded = load_config(str(path))
    assert loaded.to_dict() == cfg.to_dict()

    monkeypatch.delenv("LATGAIT_CONFIG", raising=False)
    assert load_config(None).to_dict() == ConfigFile().to_dict()

    monkeypatch.setenv("LATGAIT_CONFIG", str(path))
    assert load_config(None).expert.count == 5


# ---------------------------------------------------------------- CLI


def run_cli(args, env, cwd):
    return subprocess.run(
        [sys.executable, "-m", "latgait", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        env=env,
    )


@pytest.fixture(scope="module")
def cli_chain(tmp_path_factory):
    """Artifact chain in a temp dir: experts -> policy (D=2 and D=3) ->
    transitions -> dynamics, built through the CLI with a small config."""
    root = tmp_path_factory.mktemp("cli")
    cfg = ConfigFile()
    cfg.expert.count = 3
    cfg.training.epochs = 40
    cfg.dynamics.epochs = 80
    cfg.planner.samples = 400
    save_config(root / "cfg.json", cfg)
    env = dict(os.environ, LATGAIT_CONFIG=str(root / "cfg.json"))

    steps = {
        "gen": ["gen-experts", "--seed", "7", "--out", "experts.json"],
        "gen_again": ["gen-experts", "--seed", "7", "--out", "experts_again.json"],
        "policy": [
            "train-latent", "--experts", "experts.json",
            "--seed", "1", "--out", "policy.json",
        ],
        "policy3": [
            "train-latent", "--experts", "experts.json", "--latent-dim", "3",
            "--epochs", "5", "--seed", "1", "--out", "policy3.json",
        ],
        "collect": [
            "collect-dyn", "--policy", "policy.json", "--samples", "150",
            "--seed", "3", "--out", "trans.csv",
        ],
        "dyn": ["train-dyn", "--data", "trans.csv", "--seed", "4", "--out", "dyn.json"],
        "collect3": [
            "collect-dyn", "--policy", "policy3.json", "--samples", "150",
            "--seed", "3", "--out", "trans3.csv",
        ],
        "dyn3": ["train-dyn", "--data", "trans3.csv", "--seed", "4", "--out", "dyn3.json"],
    }
    outputs = {}
    for name, args in steps.items():
        proc = run_cli(args, env, root)
        assert proc.returncode == 0, f"{name} failed: {proc.stderr}"
        outputs[name] = proc
    return {"root": root, "env": env, "outputs": outputs}


def test_gen_experts_summary_and_determinism(cli_chain):
    out = cli_chain["outputs"]["gen"].stdout
    assert "experts: 3" in out
    assert "hash:" in out
    root = cli_chain["root"]
    first = (root / "experts.json").read_bytes()
    again = (root / "experts_again.json").read_bytes()
    assert first == again


def test_count_zero_rejected(cli_chain):
    proc = run_cli(
        ["gen-experts", "--count", "0", "--seed", "7", "--out", "zero.json"],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 2
    assert "positive" in proc.stderr
    assert not (cli_chain["root"] / "zero.json").exists()


def test_missing_input_file(cli_chain):
    proc = run_cli(
        ["train-latent", "--experts", "no_such.json", "--seed", "1", "--out", "x.json"],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 1
    assert "error:" in proc.stderr


def test_dimension_mismatch_refused_before_rollout(cli_chain):
    proc = run_cli(
        [
            "run", "--task", "velocity", "--policy", "policy.json",
            "--dyn", "dyn3.json", "--seed", "5", "--out", "mismatch_out",
        ],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 1
    assert "DimensionMismatch" in proc.stderr
    assert not (cli_chain["root"] / "mismatch_out").exists()


def test_check_gradients_report(cli_chain):
    proc = run_cli(["check", "--gradients"], cli_chain["env"], cli_chain["root"])
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["passed"] is True
    assert all(r["passed"] for r in doc["checks"])


def test_env_config_controls_defaults(cli_chain):
    # with LATGAIT_CONFIG: expert count 3 from the file
    proc = run_cli(
        ["gen-experts", "--seed", "9", "--out", "env_probe.json"],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 0
    assert "experts: 3" in proc.stdout

    # without it: built-in default count 8
    env = {k: v for k, v in cli_chain["env"].items() if k != "LATGAIT_CONFIG"}
    proc = run_cli(
        ["gen-experts", "--seed", "9", "--out", "default_probe.json"],
        env,
        cli_chain["root"],
    )
    assert proc.returncode == 0
    assert "experts: 8" in proc.stdout


def test_run_velocity_writes_metrics_and_episodes(cli_chain):
    proc = run_cli(
        [
            "run", "--task", "velocity", "--policy", "policy.json",
            "--dyn", "dyn.json", "--seed", "5", "--out", "vel_out",
        ],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 0, proc.stderr
    out = cli_chain["root"] / "vel_out"
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["task"] == "velocity"
    assert math.isfinite(metrics["mean_step_cost"])
    names = {e["name"] for e in metrics["episodes"]}
    assert names == {"vel_left", "vel_fwd", "vel_right", "vel_back"}
    for name in names:
        lines = (out / f"{name}.csv").read_text().splitlines()
        assert lines[0].startswith("cycle,")
        assert len(lines) > 1


def test_run_adverse_prints_stale_note(cli_chain):
    proc = run_cli(
        [
            "run", "--task", "velocity", "--policy", "policy.json",
            "--dyn", "dyn.json", "--adverse", "--seed", "5", "--out", "adv_out",
        ],
        cli_chain["env"],
        cli_chain["root"],
    )
    assert proc.returncode == 0, proc.stderr
    assert "stale-dynamics" in proc.stderr
    assert (cli_chain["root"] / "adv_out" / "metrics.json").exists()
