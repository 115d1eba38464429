# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Command-line interface of the VTOL transition workbench."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from importlib.resources import files
from logging import DEBUG, INFO, WARNING, basicConfig, getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Any, Self
from uuid import uuid4

from click import FLOAT, INT, STRING, ClickException, Context, Path as PathType, echo, pass_context
from cloup import Choice, HelpFormatter, HelpTheme, Style, group, option, option_group
from cloup.constraints import Equal, If, require_all

from vtol_transition.exceptions import VtolTransitionError

if TYPE_CHECKING:
    from collections.abc import Iterator

    from vtol_transition.database import DBConnect
    from vtol_transition.dynamics import VehicleParams
    from vtol_transition.pid import DualLoopGains
    from vtol_transition.policy import PpoConfig

LOG = getLogger(__name__)

SHIPPED_TRAJECTORY = Path(str(files("vtol_transition").joinpath("data", "transition_40m.csv")))
REGISTRY_FILE = "registry.sqlite"

_FORMATTER = HelpFormatter.settings(
    theme=HelpTheme(
        invoked_command=Style(fg="bright_yellow"),
        heading=Style(fg="bright_white", bold=True),
        constraint=Style(fg="magenta"),
        col1=Style(fg="bright_yellow"),
    ),
)
_CONTEXT = {"help_option_names": ["-h", "--help"]}


def print_version(ctx: Context, param: Any, value: Any) -> None:  # noqa: ANN401, ARG001
    """Prints the version of the package"""
    if not value or ctx.resilient_parsing:
        return
    from vtol_transition.database import package_version  # noqa: PLC0415

    echo(package_version())
    ctx.exit()


def ensure_larger_than_zero(
    ctx: Context,
    param: Any,  # noqa: ANN401
    value: Any,  # noqa: ANN401
) -> Any:  # noqa: ANN401
    """Ensure the value is larger than 0"""
    if value is not None and value <= 0:
        ctx.fail(f"Value for option '{param.name}' must be larger than 0!")
    return value


def ensure_larger_equal_zero(
    ctx: Context,
    param: Any,  # noqa: ANN401
    value: Any,  # noqa: ANN401
) -> Any:  # noqa: ANN401
    """Ensure the value is larger than or equal to 0"""
    if value is not None:
        values = value if isinstance(value, tuple) else (value,)
        if any(entry < 0 for entry in values):
            ctx.fail(f"Value for option '{param.name}' must be larger then or equal to 0!")
    return value


@dataclass
class RunConfig:
    """Configuration shared by all subcommands of one invocation."""

    vehicle_path: Path | None
    gains_path: Path | None
    ppo_path: Path | None
    seed: int
    output_dir: Path
    vehicle: VehicleParams
    gains: DualLoopGains
    ppo: PpoConfig

    def hashes(self: Self) -> dict[str, str]:
        from vtol_transition.config import config_hash  # noqa: PLC0415

        return {
            "vehicle": config_hash(self.vehicle_path, self.vehicle),
            "gains": config_hash(self.gains_path, self.gains),
            "ppo": config_hash(self.ppo_path, self.ppo),
        }


@dataclass
class Run:
    """A registered run: its identifier, output directory and registry."""

    run_id: str
    directory: Path
    config: RunConfig
    db: DBConnect


@contextmanager
def registered_run(ctx: Context, subcommand: str, arguments: dict[str, Any]) -> Iterator[Run]:
    """
    Registers a run in the registry and writes its manifest.

    The manifest status is updated to 'success' or 'failed' when the run ends.
    Package errors are turned into a command-line error with exit code 1.
    """
    # pylint: disable=import-outside-toplevel
    import numpy as np  # noqa: PLC0415
    import torch  # noqa: PLC0415
    import yaml  # noqa: PLC0415

    from vtol_transition.database import DBConnect, RunManifests, package_version  # noqa: PLC0415

    config: RunConfig = ctx.obj["config"]
    run_id = f"{subcommand}-{datetime.now():%Y%m%d-%H%M%S}-{uuid4().hex[:8]}"
    directory = config.output_dir / run_id
    try:
        directory.mkdir(parents=True, exist_ok=False)
        hashes = config.hashes()
    except OSError as exc:
        raise ClickException(f"Unable to create the run directory '{directory}': {exc}") from exc
    except VtolTransitionError as exc:
        raise ClickException(str(exc)) from exc

    arguments = {key: (str(value) if isinstance(value, Path) else value) for key, value in arguments.items()}
    manifest = {
        "run_id": run_id,
        "subcommand": subcommand,
        "seed": config.seed,
        "version": package_version(),
        "torch_version": torch.__version__,
        "numpy_version": np.__version__,
        "config_files": {
            "vehicle": None if config.vehicle_path is None else str(config.vehicle_path),
            "gains": None if config.gains_path is None else str(config.gains_path),
            "ppo": None if config.ppo_path is None else str(config.ppo_path),
        },
        "config_hashes": hashes,
        "arguments": arguments,
    }
    with (directory / "manifest.yaml").open("w", encoding="utf-8") as handle:
        yaml.safe_dump(manifest, handle, sort_keys=False)

    db = DBConnect(sqlite_file=str(config.output_dir / REGISTRY_FILE))
    manifests = RunManifests(db)
    manifests.start(run_id, subcommand, config.seed, hashes, yaml.safe_dump(arguments, sort_keys=True))
    LOG.info("Run '%s' writes to '%s'", run_id, directory)

    status = "failed"
    try:
        yield Run(run_id=run_id, directory=directory, config=config, db=db)
        status = "success"
    except VtolTransitionError as exc:
        LOG.error("Run '%s' failed.", run_id, exc_info=exc)
        raise ClickException(str(exc)) from exc
    finally:
        manifests.finish(run_id, status)
        db.close()


# ==============================================================================
#       G R O U P
# ==============================================================================


@group(
    context_settings=_CONTEXT,
    formatter_settings=_FORMATTER,
    invoke_without_command=True,
    no_args_is_help=False,
)
@option(
    "--version",
    is_flag=True,
    callback=print_version,
    expose_value=False,
    is_eager=True,
)
@option(
    "-v",
    "--verbose",
    count=True,
    help="Increase the verbosity of output. Use -vv for even more verbosity.",
)
@option_group(
    "Configuration files",
    option(
        "--vehicle",
        type=PathType(dir_okay=False, path_type=Path),
        help="Vehicle parameter file (flat YAML). Defaults to the built-in airframe.",
    ),
    option(
        "--gains",
        type=PathType(dir_okay=False, path_type=Path),
        help="PID gain file (flat YAML). Defaults to the shipped gains.",
    ),
    option(
        "--ppo",
        type=PathType(dir_okay=False, path_type=Path),
        help="Optimizer and curriculum hyperparameter file (flat YAML).",
    ),
)
@option(
    "--seed",
    type=INT,
    default=0,
    show_default=True,
    help="Seed of all randomness of the run.",
)
@option(
    "--output-dir",
    type=PathType(file_okay=False, path_type=Path),
    default=Path("runs"),
    show_default=True,
    envvar="VTOL_OUTPUT_DIR",
    help="Directory receiving one sub-directory per run and the run registry.",
)
@pass_context
def cli(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """
    Simulation and training workbench for the transition flight of a
    tri-rotor tilt VTOL vehicle.
    """
    if ctx.invoked_subcommand is None:
        echo(ctx.get_help())
        ctx.exit(2)

    verbosity = kwargs.get("verbose", 0)

    basicConfig(
        format="%(asctime)s %(levelname)8s | %(message)s",
        datefmt="%Y/%m/%d %H:%M:%S",
        level=INFO if verbosity == 0 else DEBUG,
    )

    noisy = ("torch", "asyncio", "sqlalchemy.engine")
    for name in noisy:
        getLogger(name).setLevel(DEBUG if verbosity > 1 else WARNING)

    from vtol_transition.config import (  # noqa: PLC0415 # pylint: disable=import-outside-toplevel
        load_pid_gains,
        load_ppo_config,
        load_vehicle_params,
    )

    try:
        vehicle = load_vehicle_params(kwargs["vehicle"])
        gains = load_pid_gains(kwargs["gains"])
        ppo = load_ppo_config(kwargs["ppo"])
    except VtolTransitionError as exc:
        raise ClickException(str(exc)) from exc

    ctx.ensure_object(dict)
    ctx.obj["config"] = RunConfig(
        vehicle_path=kwargs["vehicle"],
        gains_path=kwargs["gains"],
        ppo_path=kwargs["ppo"],
        seed=kwargs["seed"],
        output_dir=kwargs["output_dir"],
        vehicle=vehicle,
        gains=gains,
        ppo=ppo,
    )


def _trajectory_option() -> Any:  # noqa: ANN401
    return option(
        "--trajectory",
        type=PathType(exists=True, dir_okay=False, path_type=Path),
        default=SHIPPED_TRAJECTORY,
        show_default="shipped 40 m transition",
        help="Reference trajectory CSV with x, y, z and optional phi, theta, psi columns.",
    )


def _max_steps_option() -> Any:  # noqa: ANN401
    return option(
        "--max-steps",
        type=INT,
        callback=ensure_larger_than_zero,
        help="Step budget of a path execution. Defaults to the episode horizon per hover point.",
    )


# ==============================================================================
#       C O M M A N D S
# ==============================================================================


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@pass_context
def trim(ctx: Context) -> None:
    """Solve and verify the hover trim of the vehicle."""
    # pylint: disable=import-outside-toplevel
    import numpy as np  # noqa: PLC0415

    from vtol_transition.dynamics import solve_trim, trim_residual  # noqa: PLC0415

    with registered_run(ctx, "trim", {}) as run:
        params = run.config.vehicle
        solution = solve_trim(params)
        residual = float(np.max(np.abs(trim_residual(params, solution))))

        echo(f"phi_trim    = {solution.phi_trim:.9f} rad")
        echo(f"theta_trim  = {solution.theta_trim:.9f} rad")
        echo(f"mu_trim     = {solution.mu_trim:.9f} rad")
        echo(f"omega1_trim = {solution.omega1_trim:.6f} rad/s")
        echo(f"omega2_trim = {solution.omega2_trim:.6f} rad/s")
        echo(f"omega3_trim = {solution.omega3_trim:.6f} rad/s")
        echo(f"residual    = {residual:.3e}")
        if not residual < 1e-9:
            raise ClickException(f"Trim residual {residual:.3e} exceeds 1e-9")


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@option(
    "--max-range",
    type=FLOAT,
    default=10.0,
    show_default=True,
    callback=ensure_larger_equal_zero,
    help="Final target range K of the curriculum (m).",
)
@option(
    "--schedule",
    type=Choice(choices=("fine", "coarse", "direct"), case_sensitive=True),
    default="fine",
    show_default=True,
    help="""
    Curriculum schedule: 'fine' trains every integer range up to K, 'coarse'
    only 0, K/2 and K, 'direct' trains at K without a curriculum.
    """,
)
@pass_context
def train(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Train the hover controller over the progressive curriculum."""
    # pylint: disable=import-outside-toplevel
    from dataclasses import replace  # noqa: PLC0415

    from vtol_transition.database import TrainingCurve  # noqa: PLC0415
    from vtol_transition.evaluation import export_csv  # noqa: PLC0415
    from vtol_transition.hover_env import EpisodeConfig, HoverEnv  # noqa: PLC0415
    from vtol_transition.policy import ActorCritic, CheckpointInfo, save_checkpoint  # noqa: PLC0415
    from vtol_transition.training import (  # noqa: PLC0415
        CurveRow,
        StageResult,
        initial_model,
        progressive_train,
    )

    with registered_run(ctx, "train", kwargs) as run:
        config = replace(run.config.ppo, seed=run.config.seed)
        ppo_hash = run.config.hashes()["ppo"]
        env = HoverEnv(run.config.vehicle, EpisodeConfig(seed=run.config.seed))
        curve = TrainingCurve(run.run_id, run.db)
        rows: list[CurveRow] = []

        def on_iteration(row: CurveRow) -> None:
            rows.append(row)
            curve.add(row)

        def on_stage(stage: StageResult, model: ActorCritic) -> None:
            save_checkpoint(
                model,
                run.directory / f"policy_k{stage.k:g}.pt",
                CheckpointInfo(hidden_size=config.hidden_size, config_hash=ppo_hash, stage_k=stage.k),
            )

        result = progressive_train(
            kwargs["max_range"],
            initial_model(env, config),
            env,
            config,
            mode=kwargs["schedule"],
            on_iteration=on_iteration,
            on_stage=on_stage,
        )
        save_checkpoint(
            result.model,
            run.directory / "policy.pt",
            CheckpointInfo(hidden_size=config.hidden_size, config_hash=ppo_hash, stage_k=result.final_k),
        )
        export_csv(rows, run.directory / "training_curve.csv")

        echo(f"converged   = {result.converged}")
        echo(f"final k     = {result.final_k:g}")
        echo(f"best reward = {result.best_reward:.2f}")
        echo(f"env steps   = {result.env_steps}")
        echo(f"checkpoint  = {run.directory / 'policy.pt'}")


@cli.command(name="eval", context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@option(
    "--controller",
    type=Choice(choices=("st3m", "pid"), case_sensitive=False),
    default="st3m",
    show_default=True,
    help="Trained hover policy (st3m) or the dual-loop PID baseline (pid).",
)
@option_group(
    "Policy options",
    option(
        "--checkpoint",
        type=PathType(exists=True, dir_okay=False, path_type=Path),
        help="Checkpoint written by 'train'.",
    ),
    constraint=If(Equal("controller", "st3m"), then=require_all),
)
@_trajectory_option()
@option(
    "--spacing",
    type=FLOAT,
    callback=ensure_larger_than_zero,
    help="Hover point spacing (m). Defaults to the trained range, at least the arrival radius.",
)
@_max_steps_option()
@pass_context
def evaluate(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Fly a path with one controller and export its metrics."""
    # pylint: disable=import-outside-toplevel
    from vtol_transition.evaluation import export_csv, flight_profile, run_episode_metrics  # noqa: PLC0415
    from vtol_transition.hover_env import EpisodeConfig, HoverEnv  # noqa: PLC0415
    from vtol_transition.planner import balance_path, pid_execute, read_trajectory, st3m_execute  # noqa: PLC0415
    from vtol_transition.policy import load_checkpoint  # noqa: PLC0415

    with registered_run(ctx, "eval", kwargs) as run:
        env = HoverEnv(run.config.vehicle, EpisodeConfig(seed=run.config.seed))
        trajectory = read_trajectory(kwargs["trajectory"])
        if kwargs["controller"] == "st3m":
            model, info = load_checkpoint(kwargs["checkpoint"])
            spacing = kwargs["spacing"] or max(info.stage_k, env.config.arrival_radius)
            path = balance_path(trajectory, spacing)
            log = st3m_execute(
                path,
                model,
                env,
                trained_range=max(info.stage_k, env.config.arrival_radius),
                seed=run.config.seed,
                max_steps=kwargs["max_steps"],
            )
        else:
            path = balance_path(trajectory, kwargs["spacing"] or env.config.arrival_radius)
            log = pid_execute(path, run.config.gains, env, seed=run.config.seed, max_steps=kwargs["max_steps"])

        record = run_episode_metrics(log, path, trajectory)
        export_csv(record, run.directory / "metrics.csv")
        export_csv(log, run.directory / "episode_log.csv")
        export_csv(flight_profile(log), run.directory / "flight_profile.csv")
        if log.outside_trained_range:
            echo("warning: hover point spacing exceeds the trained target range")
        for name, value in record.as_dict().items():
            echo(f"{name:<22} = {value}")


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@option(
    "--checkpoint",
    type=PathType(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Checkpoint of the hover policy written by 'train'.",
)
@_trajectory_option()
@option(
    "--spacing",
    type=FLOAT,
    callback=ensure_larger_than_zero,
    help="Hover point spacing (m). Defaults to the trained range, at least the arrival radius.",
)
@_max_steps_option()
@pass_context
def compare(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Fly a path with the PID baseline and the trained policy side by side."""
    # pylint: disable=import-outside-toplevel
    from vtol_transition.evaluation import compare_controllers, export_csv  # noqa: PLC0415
    from vtol_transition.hover_env import EpisodeConfig, HoverEnv  # noqa: PLC0415
    from vtol_transition.planner import balance_path, read_trajectory  # noqa: PLC0415
    from vtol_transition.policy import load_checkpoint  # noqa: PLC0415

    with registered_run(ctx, "compare", kwargs) as run:
        env = HoverEnv(run.config.vehicle, EpisodeConfig(seed=run.config.seed))
        trajectory = read_trajectory(kwargs["trajectory"])
        model, info = load_checkpoint(kwargs["checkpoint"])
        trained_range = max(info.stage_k, env.config.arrival_radius)
        path = balance_path(trajectory, kwargs["spacing"] or trained_range)

        records = compare_controllers(
            path,
            model,
            run.config.gains,
            env,
            reference=trajectory,
            trained_range=trained_range,
            seed=run.config.seed,
            max_steps=kwargs["max_steps"],
        )
        destination = export_csv(records, run.directory / "compare.csv")
        pid, policy = records
        if pid.mean_abs_pitch > 0:
            echo(f"mean pitch ratio (ST3M / PID) = {policy.mean_abs_pitch / pid.mean_abs_pitch:.3f}")
        if pid.max_abs_pitch > 0:
            echo(f"max pitch ratio (ST3M / PID)  = {policy.max_abs_pitch / pid.max_abs_pitch:.3f}")
        echo(f"metrics written to {destination}")


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@option(
    "-k",
    "--k-value",
    "k_values",
    type=FLOAT,
    multiple=True,
    default=(0.0, 5.0, 10.0),
    show_default=True,
    callback=ensure_larger_equal_zero,
    help="Target range to evaluate, can be passed multiple times.",
)
@option(
    "--checkpoint-dir",
    type=PathType(exists=True, file_okay=False, path_type=Path),
    required=True,
    help="Directory holding the per-stage checkpoints 'policy_k<k>.pt' of a training run.",
)
@_trajectory_option()
@_max_steps_option()
@pass_context
def sweep(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Evaluate time cost, maximum error and hover fraction over target ranges."""
    # pylint: disable=import-outside-toplevel
    from vtol_transition.evaluation import export_csv, sweep_target_range  # noqa: PLC0415
    from vtol_transition.hover_env import EpisodeConfig, HoverEnv  # noqa: PLC0415
    from vtol_transition.planner import read_trajectory  # noqa: PLC0415
    from vtol_transition.policy import ActorCritic, load_checkpoint  # noqa: PLC0415

    with registered_run(ctx, "sweep", kwargs) as run:
        env = HoverEnv(run.config.vehicle, EpisodeConfig(seed=run.config.seed))
        controllers: dict[float, ActorCritic | None] = {}
        for k in kwargs["k_values"]:
            checkpoint = kwargs["checkpoint_dir"] / f"policy_k{k:g}.pt"
            controllers[k] = load_checkpoint(checkpoint)[0] if checkpoint.is_file() else None

        table = sweep_target_range(
            kwargs["k_values"],
            controllers,
            read_trajectory(kwargs["trajectory"]),
            env,
            seed=run.config.seed,
            max_steps=kwargs["max_steps"],
        )
        destination = export_csv(table, run.directory / "sweep.csv")
        echo(table.to_frame().to_string(index=False))
        echo(f"max error non-decreasing in k: {table.max_error_nondecreasing}")
        echo(f"table written to {destination}")


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@_trajectory_option()
@option(
    "--spacing",
    type=FLOAT,
    required=True,
    callback=ensure_larger_than_zero,
    help="Maximum distance between consecutive hover points (m).",
)
@pass_context
def plan(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Resample a trajectory into equally spaced hover points."""
    # pylint: disable=import-outside-toplevel
    from vtol_transition.planner import balance_path, read_trajectory, write_path  # noqa: PLC0415

    with registered_run(ctx, "plan", kwargs) as run:
        path = balance_path(read_trajectory(kwargs["trajectory"]), kwargs["spacing"])
        destination = write_path(path, run.directory / "path.csv")
        echo(f"{len(path)} hover points, max step {path.max_step:.4f} m, written to {destination}")


@cli.command(context_settings=_CONTEXT, formatter_settings=_FORMATTER)
@option(
    "--rate",
    type=FLOAT,
    default=100.0,
    show_default=True,
    callback=ensure_larger_than_zero,
    help="Tick rate of both link directions (Hz).",
)
@option(
    "--duration",
    type=FLOAT,
    default=1.0,
    show_default=True,
    callback=ensure_larger_than_zero,
    help="Length of the session (s).",
)
@option(
    "--drop",
    type=FLOAT,
    default=0.0,
    show_default=True,
    callback=ensure_larger_equal_zero,
    help="Probability of dropping a command frame on purpose.",
)
@option_group(
    "Vehicle endpoint",
    option("--sim-host", type=STRING, default="127.0.0.1", show_default=True, help="Address of the endpoint."),
    option(
        "--sim-port",
        type=INT,
        default=0,
        show_default=True,
        help="Port of the endpoint. 0 lets the simulated endpoint pick a free port.",
    ),
    option(
        "--external",
        is_flag=True,
        default=False,
        help="Connect to an already running endpoint instead of starting the simulator.",
    ),
    option(
        "--zero-after",
        type=INT,
        callback=ensure_larger_than_zero,
        help="Stop the rotors after this many ticks without a command. Holds the last command by default."
        " Only applies to the simulated endpoint.",
    ),
)
@pass_context
def bridge(ctx: Context, **kwargs: Any) -> None:  # noqa: ANN401
    """Run a ground-station link session against the vehicle endpoint."""
    # pylint: disable=import-outside-toplevel
    import asyncio  # noqa: PLC0415
    from dataclasses import asdict  # noqa: PLC0415

    import yaml  # noqa: PLC0415

    from vtol_transition.bridge import HoldCommand, SessionStats, SimEndpoint, bridge_loop  # noqa: PLC0415
    from vtol_transition.dynamics import solve_trim  # noqa: PLC0415

    if kwargs["drop"] >= 1.0:
        ctx.fail("Value for option 'drop' must be smaller than 1!")
    if kwargs["external"] and kwargs["sim_port"] == 0:
        ctx.fail("An external endpoint requires --sim-port.")
    if kwargs["external"] and kwargs["zero_after"] is not None:
        ctx.fail("--zero-after configures the simulated endpoint and can't be used with --external.")

    with registered_run(ctx, "bridge", kwargs) as run:
        controller = HoldCommand(solve_trim(run.config.vehicle).command())

        async def main() -> SessionStats:
            if kwargs["external"]:
                endpoint = (kwargs["sim_host"], kwargs["sim_port"])
                return await bridge_loop(
                    controller,
                    endpoint,
                    kwargs["rate"],
                    duration=kwargs["duration"],
                    drop_probability=kwargs["drop"],
                    seed=run.config.seed,
                )
            async with SimEndpoint(
                run.config.vehicle,
                kwargs["rate"],
                host=kwargs["sim_host"],
                port=kwargs["sim_port"],
                zero_after=kwargs["zero_after"],
            ) as sim:
                return await bridge_loop(
                    controller,
                    sim.address,
                    kwargs["rate"],
                    duration=kwargs["duration"],
                    drop_probability=kwargs["drop"],
                    seed=run.config.seed,
                )

        stats = asyncio.run(main())
        summary = {key: value for key, value in asdict(stats).items() if key != "jitter"}
        with (run.directory / "bridge_stats.yaml").open("w", encoding="utf-8") as handle:
            yaml.safe_dump(summary, handle, sort_keys=False)
        for name, value in summary.items():
            echo(f"{name:<14} = {value}")
