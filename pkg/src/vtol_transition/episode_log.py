# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Per-step flight logs recorded by the path executor, the PID baseline and the
evaluation episodes, including their CSV representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Self

import numpy as np
import pandas as pd

from vtol_transition.dynamics import ActuatorCommand, BodyState
from vtol_transition.hover_env import TerminationStatus, classify_mode

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import NDArray

LOG = getLogger(__name__)

#: Column order of an exported episode log.
LOG_COLUMNS: tuple[str, ...] = (
    "time",
    "x",
    "y",
    "z",
    "phi",
    "theta",
    "psi",
    "u",
    "v",
    "w",
    "p",
    "q",
    "r",
    "omega1",
    "omega2",
    "omega3",
    "mu_a",
    "mu_b",
    "reward",
    "mode",
    "target_index",
    "target_x",
    "target_y",
    "target_z",
    "status",
    "completed",
    "outside_trained_range",
)

#: Columns repeating the episode outcome on every row.
_OUTCOME_COLUMNS: list[str] = ["status", "completed", "outside_trained_range"]

_TIME_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class LogRow:
    """State, command and target of a single logged step."""

    time: float
    state: BodyState
    command: ActuatorCommand
    reward: float
    target_index: int
    target: NDArray[np.float64]

    @property
    def mode(self: Self) -> str:
        return classify_mode(self.command.mean_tilt)

    def as_record(self: Self) -> list[float | int | str]:
        return [
            self.time,
            *self.state.position,
            *self.state.attitude,
            *self.state.velocity,
            *self.state.rates,
            *self.command.as_array(),
            self.reward,
            self.mode,
            self.target_index,
            *np.asarray(self.target, dtype=np.float64),
        ]


@dataclass
class EpisodeLog:
    """
    Ordered rows of one episode plus its termination status.

    Rows are appended with strictly increasing time at a constant spacing of
    ``dt``. ``completed`` is set by executors that reached their final target,
    ``outside_trained_range`` when the path asked for larger target steps than
    the controller was trained for.
    """

    dt: float
    rows: list[LogRow] = field(default_factory=list)
    status: TerminationStatus = TerminationStatus.RUNNING
    completed: bool = False
    outside_trained_range: bool = False
    label: str = ""

    def __post_init__(self: Self) -> None:
        if self.dt <= 0:
            raise ValueError(f"Log spacing dt must be > 0, got {self.dt}")

    def __len__(self: Self) -> int:
        return len(self.rows)

    def append(self: Self, row: LogRow) -> None:
        if self.rows:
            spacing = row.time - self.rows[-1].time
            if abs(spacing - self.dt) > _TIME_TOLERANCE * max(1.0, abs(row.time)):
                raise ValueError(
                    f"Log rows must be spaced by dt={self.dt}, got {spacing} at t={row.time}",
                )
        self.rows.append(row)

    def record(
        self: Self,
        state: BodyState,
        command: ActuatorCommand,
        reward: float,
        target_index: int,
        target: Sequence[float] | NDArray[np.float64],
    ) -> LogRow:
        """Appends a row one ``dt`` after the previous one (at ``dt`` for the first)."""
        time = (len(self.rows) + 1) * self.dt
        row = LogRow(
            time=time,
            state=state,
            command=command,
            reward=float(reward),
            target_index=int(target_index),
            target=np.array(target, dtype=np.float64),
        )
        self.append(row)
        return row

    # ------------------------------------------------------------------ columns

    @property
    def times(self: Self) -> NDArray[np.float64]:
        return np.array([row.time for row in self.rows], dtype=np.float64)

    @property
    def positions(self: Self) -> NDArray[np.float64]:
        return np.array([row.state.position for row in self.rows], dtype=np.float64).reshape(-1, 3)

    @property
    def attitudes(self: Self) -> NDArray[np.float64]:
        return np.array([row.state.attitude for row in self.rows], dtype=np.float64).reshape(-1, 3)

    @property
    def velocities(self: Self) -> NDArray[np.float64]:
        return np.array([row.state.velocity for row in self.rows], dtype=np.float64).reshape(-1, 3)

    @property
    def rates(self: Self) -> NDArray[np.float64]:
        return np.array([row.state.rates for row in self.rows], dtype=np.float64).reshape(-1, 3)

    @property
    def commands(self: Self) -> NDArray[np.float64]:
        return np.array([row.command.as_array() for row in self.rows], dtype=np.float64).reshape(-1, 5)

    @property
    def rewards(self: Self) -> NDArray[np.float64]:
        return np.array([row.reward for row in self.rows], dtype=np.float64)

    @property
    def targets(self: Self) -> NDArray[np.float64]:
        return np.array([row.target for row in self.rows], dtype=np.float64).reshape(-1, 3)

    @property
    def target_indices(self: Self) -> NDArray[np.int64]:
        return np.array([row.target_index for row in self.rows], dtype=np.int64)

    @property
    def mean_tilts(self: Self) -> NDArray[np.float64]:
        return np.array([row.command.mean_tilt for row in self.rows], dtype=np.float64)

    @property
    def cumulative_reward(self: Self) -> float:
        return float(self.rewards.sum())

    @property
    def duration(self: Self) -> float:
        return len(self.rows) * self.dt

    @property
    def failed(self: Self) -> bool:
        return self.status.is_failure

    def concatenate(self: Self, other: EpisodeLog) -> EpisodeLog:
        """Appends ``other`` behind this log, shifting its time axis."""
        if abs(other.dt - self.dt) > _TIME_TOLERANCE:
            raise ValueError("Only logs with identical dt can be concatenated")
        merged = EpisodeLog(dt=self.dt, status=other.status, completed=other.completed, label=self.label)
        for row in self.rows:
            merged.append(row)
        offset = self.duration
        for row in other.rows:
            merged.append(
                LogRow(
                    time=row.time + offset,
                    state=row.state,
                    command=row.command,
                    reward=row.reward,
                    target_index=row.target_index,
                    target=row.target,
                ),
            )
        return merged

    # ---------------------------------------------------------------------- csv

    def to_frame(self: Self) -> pd.DataFrame:
        outcome = [self.status.value, self.completed, self.outside_trained_range]
        return pd.DataFrame([[*row.as_record(), *outcome] for row in self.rows], columns=list(LOG_COLUMNS))

    @classmethod
    def from_frame(
        cls: type[EpisodeLog],
        frame: pd.DataFrame,
        dt: float | None = None,
    ) -> EpisodeLog:
        """
        Rebuilds a log from :meth:`to_frame` output. The outcome is read from
        the last row; an empty frame gives a running episode.

        Raises:
            ValueError: for missing columns or an unknown status.
        """
        missing = [column for column in LOG_COLUMNS if column not in frame.columns]
        if missing:
            raise ValueError(f"Episode log is missing the columns {missing}")
        if dt is None:
            times = frame["time"].to_numpy(dtype=np.float64)
            dt = float(times[1] - times[0]) if len(times) > 1 else float(times[0]) if len(times) else 1.0
        log = cls(dt=dt)
        if len(frame):
            status, completed, outside = frame[_OUTCOME_COLUMNS].iloc[-1]
            log.status = TerminationStatus(status)
            log.completed = _as_flag(completed)
            log.outside_trained_range = _as_flag(outside)
        for record in frame.itertuples(index=False):
            state = BodyState(
                position=(record.x, record.y, record.z),
                velocity=(record.u, record.v, record.w),
                attitude=(record.phi, record.theta, record.psi),
                rates=(record.p, record.q, record.r),
            )
            command = ActuatorCommand(
                omega1=record.omega1,
                omega2=record.omega2,
                omega3=record.omega3,
                mu_a=record.mu_a,
                mu_b=record.mu_b,
            )
            log.append(
                LogRow(
                    time=float(record.time),
                    state=state,
                    command=command,
                    reward=float(record.reward),
                    target_index=int(record.target_index),
                    target=np.array([record.target_x, record.target_y, record.target_z], dtype=np.float64),
                ),
            )
        return log


def _as_flag(value: object) -> bool:
    if isinstance(value, str):
        return value.strip().lower() == "true"
    return bool(value)


def read_episode_log(path: str | Path, dt: float | None = None) -> EpisodeLog:
    """Reads a log written by ``EpisodeLog.to_frame().to_csv``."""
    frame = pd.read_csv(Path(path), float_precision="round_trip")
    return EpisodeLog.from_frame(frame, dt=dt)


def merge_logs(logs: Iterable[EpisodeLog]) -> EpisodeLog:
    """Concatenates logs in order; at least one log is required."""
    iterator = iter(logs)
    try:
        merged = next(iterator)
    except StopIteration as exc:
        raise ValueError("At least one log is required") from exc
    for log in iterator:
        merged = merged.concatenate(log)
    return merged
