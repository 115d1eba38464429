# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from vtol_transition.cli import REGISTRY_FILE, cli
from vtol_transition.database import DBConnect, RunManifests
from vtol_transition.policy import ActorCritic, CheckpointInfo, save_checkpoint


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def trajectory(tmp_path: Path) -> Path:
    """A straight 4 m climb-out along x."""
    path = tmp_path / "straight.csv"
    path.write_text("x,y,z\n0.0,0.0,0.0\n2.0,0.0,0.0\n4.0,0.0,0.0\n", encoding="utf-8")
    return path


@pytest.fixture
def checkpoint(tmp_path: Path, model: ActorCritic) -> Path:
    return save_checkpoint(model, tmp_path / "ckpt" / "policy_k0.pt", CheckpointInfo(hidden_size=16))


def invoke(runner: CliRunner, output_dir: Path, *args: str) -> object:
    return runner.invoke(cli, ["--output-dir", str(output_dir), *args], catch_exceptions=False)


def run_dirs(output_dir: Path, subcommand: str) -> list[Path]:
    return sorted(output_dir.glob(f"{subcommand}-*"))


def registered(output_dir: Path) -> list[dict]:
    db = DBConnect(sqlite_file=str(output_dir / REGISTRY_FILE))
    runs = RunManifests(db).get_runs()
    db.close()
    return runs


# ==============================================================================


def test_cli_help(runner: CliRunner) -> None:
    """Test the help message"""
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    assert "Usage:" in result.output
    for command in ("trim", "train", "eval", "compare", "sweep", "plan", "bridge"):
        assert command in result.output


def test_cli_version(runner: CliRunner) -> None:
    """Test the version message"""
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert result.output.strip()


def test_cli_without_command(runner: CliRunner) -> None:
    """Test that a missing subcommand prints the help and exits with 2"""
    result = runner.invoke(cli, [])
    assert result.exit_code == 2
    assert "Usage:" in result.output


# ==============================================================================


def test_cli_trim(runner: CliRunner, tmp_path: Path) -> None:
    """Test the trim command writes its manifest and registers the run"""
    result = invoke(runner, tmp_path, "--seed", "3", "trim")
    assert result.exit_code == 0, result.output
    assert "theta_trim" in result.output
    assert "residual" in result.output

    (directory,) = run_dirs(tmp_path, "trim")
    manifest = yaml.safe_load((directory / "manifest.yaml").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "trim"
    assert manifest["seed"] == 3
    assert manifest["config_files"]["vehicle"] is None
    assert len(manifest["config_hashes"]["vehicle"]) == 64

    (run,) = registered(tmp_path)
    assert run["run_id"] == directory.name
    assert run["status"] == "success"


def test_cli_invalid_configuration(runner: CliRunner, tmp_path: Path) -> None:
    """Test that an invalid file is reported with its key and exit code 1"""
    vehicle = tmp_path / "vehicle.yaml"
    vehicle.write_text("m: 1.0\nwingspan: 0.5\n", encoding="utf-8")
    result = runner.invoke(cli, ["--output-dir", str(tmp_path / "runs"), "--vehicle", str(vehicle), "trim"])
    assert result.exit_code == 1
    assert "wingspan" in result.output
    assert str(vehicle) in result.output
    assert not (tmp_path / "runs").exists()


def test_cli_plan(runner: CliRunner, tmp_path: Path, trajectory: Path) -> None:
    """Test resampling a trajectory into hover points"""
    result = invoke(runner, tmp_path, "plan", "--trajectory", str(trajectory), "--spacing", "1.0")
    assert result.exit_code == 0, result.output
    assert "5 hover points" in result.output
    (directory,) = run_dirs(tmp_path, "plan")
    assert (directory / "path.csv").is_file()


def test_cli_plan_requires_positive_spacing(runner: CliRunner, tmp_path: Path) -> None:
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "plan", "--spacing", "0"])
    assert result.exit_code == 2
    assert "must be larger than 0" in result.output


# ==============================================================================


def test_cli_eval_pid(runner: CliRunner, tmp_path: Path, trajectory: Path) -> None:
    """Test evaluating the PID baseline on a short step budget"""
    result = invoke(
        runner,
        tmp_path,
        "eval",
        "--controller",
        "pid",
        "--trajectory",
        str(trajectory),
        "--max-steps",
        "20",
    )
    assert result.exit_code == 0, result.output
    assert "mean_abs_pitch" in result.output
    (directory,) = run_dirs(tmp_path, "eval")
    for name in ("metrics.csv", "episode_log.csv", "flight_profile.csv", "manifest.yaml"):
        assert (directory / name).is_file()


def test_cli_eval_policy_requires_checkpoint(runner: CliRunner, tmp_path: Path) -> None:
    """Test that the policy controller can't run without a checkpoint"""
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "eval", "--controller", "st3m"])
    assert result.exit_code == 2
    assert not run_dirs(tmp_path, "eval")


def test_cli_compare(runner: CliRunner, tmp_path: Path, trajectory: Path, checkpoint: Path) -> None:
    """Test flying both controllers with a saved checkpoint"""
    result = invoke(
        runner,
        tmp_path,
        "compare",
        "--checkpoint",
        str(checkpoint),
        "--trajectory",
        str(trajectory),
        "--max-steps",
        "20",
    )
    assert result.exit_code == 0, result.output
    assert "metrics written to" in result.output
    (directory,) = run_dirs(tmp_path, "compare")
    assert (directory / "compare.csv").is_file()


def test_cli_sweep_without_checkpoints(runner: CliRunner, tmp_path: Path, trajectory: Path) -> None:
    """Test that missing stage checkpoints still give a table"""
    empty = tmp_path / "empty"
    empty.mkdir()
    result = invoke(
        runner,
        tmp_path,
        "sweep",
        "-k",
        "0",
        "-k",
        "2",
        "--checkpoint-dir",
        str(empty),
        "--trajectory",
        str(trajectory),
        "--max-steps",
        "10",
    )
    assert result.exit_code == 0, result.output
    (directory,) = run_dirs(tmp_path, "sweep")
    assert (directory / "sweep.csv").is_file()


def test_cli_train(runner: CliRunner, tmp_path: Path) -> None:
    """Test a minimal training run writes checkpoints and the curve"""
    ppo = tmp_path / "ppo.yaml"
    ppo.write_text(
        "rollout_steps: 64\nn_envs: 2\nminibatch_size: 32\nepochs: 1\nmax_iterations: 1\n"
        "eval_interval: 1\neval_episodes: 1\nhidden_size: 16\n",
        encoding="utf-8",
    )
    result = invoke(runner, tmp_path / "runs", "--ppo", str(ppo), "train", "--max-range", "0", "--schedule", "direct")
    assert result.exit_code == 0, result.output
    (directory,) = run_dirs(tmp_path / "runs", "train")
    for name in ("policy.pt", "policy_k0.pt", "training_curve.csv"):
        assert (directory / name).is_file()
    assert registered(tmp_path / "runs")[0]["ppo_hash"] != ""


# ==============================================================================


def test_cli_bridge(runner: CliRunner, tmp_path: Path) -> None:
    """Test a short link session against the simulated endpoint"""
    result = invoke(runner, tmp_path, "bridge", "--duration", "0.2")
    assert result.exit_code == 0, result.output
    assert "sent" in result.output
    (directory,) = run_dirs(tmp_path, "bridge")
    stats = yaml.safe_load((directory / "bridge_stats.yaml").read_text(encoding="utf-8"))
    assert stats["ticks"] == 20
    assert stats["final_state"] == "SHUTDOWN_REQUESTED"


@pytest.mark.parametrize(
    "args",
    [
        ("bridge", "--drop", "1.0"),
        ("bridge", "--external"),
        ("bridge", "--rate", "0"),
    ],
)
def test_cli_bridge_invalid_options(runner: CliRunner, tmp_path: Path, args: tuple[str, ...]) -> None:
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), *args])
    assert result.exit_code == 2


def test_cli_bridge_external_rejects_zero_after(runner: CliRunner, tmp_path: Path) -> None:
    """Test that simulator-only options are refused for an external endpoint"""
    result = runner.invoke(
        cli,
        ["--output-dir", str(tmp_path), "bridge", "--external", "--sim-port", "9000", "--zero-after", "3"],
    )
    assert result.exit_code == 2
    assert "--zero-after" in result.output
    assert not run_dirs(tmp_path, "bridge")
