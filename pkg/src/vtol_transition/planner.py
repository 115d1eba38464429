# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Transition planning and execution.

A reference trajectory is resampled by arc length into a path of hover points.
The trained hover controller then flies the path by treating the points as
successive hover targets: the active point advances whenever the vehicle is
within the arrival radius. The same executor flies the PID baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from logging import getLogger
from math import ceil
from pathlib import Path
from typing import TYPE_CHECKING, Self

import numpy as np
import pandas as pd

from vtol_transition.episode_log import EpisodeLog
from vtol_transition.exceptions import ConfigurationError, TrajectoryError
from vtol_transition.hover_env import HOVER_TILT_LIMIT, HoverEnv, normalize_command
from vtol_transition.pid import DualLoopController, DualLoopGains
from vtol_transition.policy import ActorCritic, policy_eval

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import NDArray

LOG = getLogger(__name__)

TRAJECTORY_COLUMNS: tuple[str, ...] = ("x", "y", "z")
ATTITUDE_COLUMNS: tuple[str, ...] = ("phi", "theta", "psi")


def _arc_lengths(points: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Earth-frame reference polyline with optional reference attitudes.

    Raises:
        TrajectoryError: for fewer than two points, repeated consecutive points
            or non-finite coordinates.
    """

    points: NDArray[np.float64]
    attitudes: NDArray[np.float64] | None = None

    def __post_init__(self: Self) -> None:
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) < 2:
            raise TrajectoryError(f"A trajectory needs at least two 3D points, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise TrajectoryError("Trajectory contains non-finite coordinates")
        if np.any(np.linalg.norm(np.diff(points, axis=0), axis=1) == 0.0):
            raise TrajectoryError("Consecutive trajectory points must be distinct")
        object.__setattr__(self, "points", points)
        if self.attitudes is not None:
            attitudes = np.array(self.attitudes, dtype=np.float64)
            if attitudes.shape != points.shape:
                raise TrajectoryError("Reference attitudes must match the trajectory points")
            object.__setattr__(self, "attitudes", attitudes)

    @property
    def cumulative_length(self: Self) -> NDArray[np.float64]:
        return _arc_lengths(self.points)

    @property
    def length(self: Self) -> float:
        return float(self.cumulative_length[-1])

    def interpolate(self: Self, s: NDArray[np.float64] | float) -> NDArray[np.float64]:
        """Positions at the arc lengths ``s``, clipped to the trajectory."""
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=np.float64)), 0.0, self.length)
        cumulative = self.cumulative_length
        return np.column_stack([np.interp(s, cumulative, self.points[:, axis]) for axis in range(3)])


@dataclass(frozen=True, eq=False)
class PlannedPath:
    """Ordered hover points and the spacing they were planned with."""

    points: NDArray[np.float64]
    spacing: float
    attitudes: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self: Self) -> None:
        points = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise TrajectoryError("A planned path needs at least one hover point")
        attitudes = np.array(self.attitudes, dtype=np.float64).reshape(-1, 3)
        if len(attitudes) == 0:
            attitudes = np.zeros_like(points)
        if attitudes.shape != points.shape:
            raise TrajectoryError("Hover point attitudes must match the hover points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "attitudes", attitudes)

    def __len__(self: Self) -> int:
        return len(self.points)

    @property
    def max_step(self: Self) -> float:
        """Largest distance between consecutive hover points."""
        if len(self.points) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    @property
    def max_axis_step(self: Self) -> float:
        """Largest per-axis distance between consecutive hover points."""
        if len(self.points) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.points, axis=0))))


def balance_path(traj: Trajectory, spacing: float) -> PlannedPath:
    """
    Resamples ``traj`` at equal arc-length steps no longer than ``spacing``.

    The result has ``ceil(length / spacing) + 1`` points and starts and ends
    exactly at the trajectory endpoints.
    """
    if not spacing > 0:
        raise ValueError(f"Path spacing must be > 0, got {spacing}")
    length = traj.length
    count = ceil(length / spacing) + 1
    s = np.linspace(0.0, length, count)
    points = traj.interpolate(s)
    points[0], points[-1] = traj.points[0], traj.points[-1]

    attitudes = np.zeros_like(points)
    if traj.attitudes is not None:
        cumulative = traj.cumulative_length
        attitudes = np.column_stack([np.interp(s, cumulative, traj.attitudes[:, axis]) for axis in range(3)])

    LOG.debug("Balanced %.2f m trajectory into %d hover points (spacing %.3f m)", length, count, spacing)
    return PlannedPath(points=points, spacing=float(spacing), attitudes=attitudes)


# ==============================================================================
#       C O S T
# ==============================================================================


def _check_psd(matrix: NDArray[np.float64], name: str) -> NDArray[np.float64]:
    matrix = np.array(matrix, dtype=np.float64)
    if matrix.shape != (3, 3):
        raise ConfigurationError(f"{name} must be a 3x3 matrix", key=name)
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise ConfigurationError(f"{name} must be symmetric", key=name)
    if float(np.min(np.linalg.eigvalsh(matrix))) < -1e-12:
        raise ConfigurationError(f"{name} must be positive semidefinite", key=name)
    return matrix


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Quadratic weights of position and attitude errors plus smoothness bounds."""

    Q1: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    Q2: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    eps1_max: float = 2.0
    eps2_max: float = 1.0

    def __post_init__(self: Self) -> None:
        object.__setattr__(self, "Q1", _check_psd(self.Q1, "Q1"))
        object.__setattr__(self, "Q2", _check_psd(self.Q2, "Q2"))
        if self.eps1_max <= 0 or self.eps2_max <= 0:
            raise ConfigurationError("Smoothness bounds must be > 0", key="eps1_max")


@dataclass(frozen=True)
class TrackingCost:
    """
    Tracking cost ``J`` and the smoothness diagnostics.

    The velocity and rate jumps are the largest differences between
    consecutive evaluated samples; they are reported, not enforced.
    """

    value: float
    samples: int
    max_velocity_jump: float
    max_rate_jump: float
    velocity_jump_ok: bool
    rate_jump_ok: bool

    def __float__(self: Self) -> float:
        return self.value


def passage_indices(log: EpisodeLog) -> NDArray[np.int64]:
    """
    Log rows at which the vehicle passed its hover points: for every active
    target index, the row closest to that target.
    """
    indices = log.target_indices
    distances = np.linalg.norm(log.targets - log.positions, axis=1)
    passages = []
    for target_index in np.unique(indices):
        rows = np.flatnonzero(indices == target_index)
        passages.append(rows[int(np.argmin(distances[rows]))])
    return np.array(passages, dtype=np.int64)


def tracking_cost(
    log: EpisodeLog,
    path: PlannedPath,
    weights: CostWeights | None = None,
    *,
    per_step: bool = False,
) -> TrackingCost:
    """
    Sums ``dP^T Q1 dP + dI^T Q2 dI`` over the hover-point passages of ``log``,
    or over every step with ``per_step``. Errors are achieved minus reference
    values of the active hover point.
    """
    if len(log) == 0:
        raise ValueError("Cannot evaluate the tracking cost of an empty log")
    weights = weights or CostWeights()
    rows = np.arange(len(log)) if per_step else passage_indices(log)
    target_indices = log.target_indices[rows]

    delta_p = log.positions[rows] - path.points[target_indices]
    delta_i = log.attitudes[rows] - path.attitudes[target_indices]
    value = float(
        np.einsum("ni,ij,nj->", delta_p, weights.Q1, delta_p) + np.einsum("ni,ij,nj->", delta_i, weights.Q2, delta_i),
    )

    velocity_jump = rate_jump = 0.0
    if len(rows) > 1:
        velocity_jump = float(np.max(np.linalg.norm(np.diff(log.velocities[rows], axis=0), axis=1)))
        rate_jump = float(np.max(np.linalg.norm(np.diff(log.rates[rows], axis=0), axis=1)))

    return TrackingCost(
        value=value,
        samples=len(rows),
        max_velocity_jump=velocity_jump,
        max_rate_jump=rate_jump,
        velocity_jump_ok=velocity_jump <= weights.eps1_max,
        rate_jump_ok=rate_jump <= weights.eps2_max,
    )


def mode_fractions(log: EpisodeLog) -> tuple[float, float]:
    """Fractions of steps in hover mode (mean tilt <= 60 deg) and cruise mode."""
    if len(log) == 0:
        raise ValueError("Cannot classify the modes of an empty log")
    hover = int(np.count_nonzero(log.mean_tilts <= HOVER_TILT_LIMIT)) / len(log)
    return hover, 1.0 - hover


# ==============================================================================
#       E X E C U T I O N
# ==============================================================================


def _execution_env(template: HoverEnv, max_steps: int, seed: int | None) -> HoverEnv:
    return HoverEnv(
        template.params,
        replace(template.config, horizon=max_steps, seed=seed),
        template.weights,
        random_walk=False,
    )


def follow_path(
    path: PlannedPath,
    act: Callable[[HoverEnv, NDArray[np.float64]], NDArray[np.float64]],
    env: HoverEnv,
    *,
    max_steps: int | None = None,
    seed: int | None = None,
    noise: bool = False,
    on_reset: Callable[[], None] | None = None,
    label: str = "",
) -> EpisodeLog:
    """
    Flies the hover points of ``path`` in order with the action source ``act``.

    The vehicle spawns at the first hover point. The active point advances once
    the vehicle is within the arrival radius; the episode ends after the last
    point was reached, on a failure termination or after ``max_steps``.
    """
    max_steps = max_steps or env.config.horizon * max(len(path), 1)
    runner = _execution_env(env, max_steps, seed)
    runner.reset(seed, position=path.points[0], target=path.points[0], noise=noise)
    if on_reset is not None:
        on_reset()

    log = EpisodeLog(dt=runner.params.dt, label=label)
    index = 0
    done = False
    while not done:
        runner.set_target(path.points[index])
        _, reward, done, info = runner.step(act(runner, runner.observation()))
        log.record(runner.state, info.command, reward, index, path.points[index])
        log.status = info.status

        if info.arrived:
            if index == len(path) - 1:
                log.completed = True
                break
            index += 1

    if log.failed:
        LOG.warning("Path execution failed at hover point %d/%d: %s", index, len(path), log.status.value)
    return log


def st3m_execute(
    path: PlannedPath,
    params: ActorCritic,
    env: HoverEnv,
    *,
    trained_range: float | None = None,
    max_steps: int | None = None,
    seed: int | None = None,
    noise: bool = False,
) -> EpisodeLog:
    """
    Flies ``path`` with the deterministic hover policy ``params``.

    With ``trained_range`` given, a path whose consecutive hover points are
    further apart than that range is flagged in the returned log.
    """
    outside = trained_range is not None and path.max_step > trained_range
    if outside:
        LOG.warning(
            "Hover point spacing %.3f m exceeds the trained target range %.3f m",
            path.max_step,
            trained_range,
        )

    log = follow_path(
        path,
        lambda _env, obs: policy_eval(obs, params, mode="mean").action,
        env,
        max_steps=max_steps,
        seed=seed,
        noise=noise,
        label="ST3M",
    )
    log.outside_trained_range = outside
    return log


def pid_execute(
    path: PlannedPath,
    gains: DualLoopGains,
    env: HoverEnv,
    *,
    max_steps: int | None = None,
    seed: int | None = None,
    noise: bool = False,
) -> EpisodeLog:
    """Flies ``path`` with the dual-loop PID baseline."""
    controller = DualLoopController(env.params, gains)

    def act(runner: HoverEnv, _obs: NDArray[np.float64]) -> NDArray[np.float64]:
        return normalize_command(controller(runner.state, runner.target), runner.params)

    return follow_path(
        path,
        act,
        env,
        max_steps=max_steps,
        seed=seed,
        noise=noise,
        on_reset=controller.reset,
        label="Dual Loop PID",
    )


# ==============================================================================
#       I / O
# ==============================================================================


def read_trajectory(path: str | Path) -> Trajectory:
    """Reads a trajectory CSV with ``x, y, z`` and optional ``phi, theta, psi`` columns."""
    frame = pd.read_csv(Path(path), float_precision="round_trip")
    missing = [column for column in TRAJECTORY_COLUMNS if column not in frame.columns]
    if missing:
        raise TrajectoryError(f"Trajectory file '{path}' is missing the columns {missing}")
    attitudes = None
    if all(column in frame.columns for column in ATTITUDE_COLUMNS):
        attitudes = frame[list(ATTITUDE_COLUMNS)].to_numpy(dtype=np.float64)
    return Trajectory(points=frame[list(TRAJECTORY_COLUMNS)].to_numpy(dtype=np.float64), attitudes=attitudes)


def write_path(path: PlannedPath, destination: str | Path) -> Path:
    """Writes the hover points in the trajectory CSV format."""
    destination = Path(destination)
    frame = pd.DataFrame(path.points, columns=list(TRAJECTORY_COLUMNS))
    frame[list(ATTITUDE_COLUMNS)] = path.attitudes
    frame.to_csv(destination, index=False, lineterminator="\n")
    return destination


def distance_to_polyline(
    positions: NDArray[np.float64],
    polyline: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Shortest distance of every position to the segments of ``polyline``."""
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    polyline = np.atleast_2d(np.asarray(polyline, dtype=np.float64))
    if len(polyline) == 1:
        return np.linalg.norm(positions - polyline[0], axis=1)

    start = polyline[:-1]
    segment = polyline[1:] - start
    squared = np.einsum("ij,ij->i", segment, segment)
    offset = positions[:, None, :] - start[None, :, :]
    t = np.clip(np.einsum("nij,ij->ni", offset, segment) / np.where(squared > 0, squared, 1.0), 0.0, 1.0)
    closest = start[None, :, :] + t[..., None] * segment[None, :, :]
    return np.min(np.linalg.norm(positions[:, None, :] - closest, axis=2), axis=1)
