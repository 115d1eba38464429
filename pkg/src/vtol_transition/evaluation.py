# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Metrics harness.

Angles are radians internally and degrees in every record and export. The
position error of a step is the distance to the hover target active at that
step; the distance to the reference polyline is reported next to it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from logging import getLogger
from math import degrees, isfinite
from pathlib import Path
from typing import TYPE_CHECKING, Any, Self

import numpy as np
import pandas as pd

from vtol_transition.episode_log import EpisodeLog
from vtol_transition.exceptions import ExportError
from vtol_transition.planner import (
    PlannedPath,
    Trajectory,
    balance_path,
    distance_to_polyline,
    mode_fractions,
    pid_execute,
    st3m_execute,
)
from vtol_transition.training import CURVE_COLUMNS, CurveRow

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from numpy.typing import NDArray

    from vtol_transition.hover_env import HoverEnv
    from vtol_transition.pid import DualLoopGains
    from vtol_transition.policy import ActorCritic

LOG = getLogger(__name__)


@dataclass(frozen=True)
class MetricsRecord:
    """
    Per-episode result row.

    The first three metrics follow the usual comparison table: mean absolute
    pitch, maximum and mean position error.
    """

    controller: str
    mean_abs_pitch: float
    max_position_error: float
    mean_position_error: float
    max_abs_pitch: float = 0.0
    mean_abs_roll: float = 0.0
    max_abs_roll: float = 0.0
    max_reference_error: float = 0.0
    mean_reference_error: float = 0.0
    hover_fraction: float = 1.0
    cruise_fraction: float = 0.0
    completed: bool = False
    duration: float = 0.0
    steps: int = 0
    status: str = "running"

    def as_dict(self: Self) -> dict[str, Any]:
        return asdict(self)


METRICS_COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(MetricsRecord))


def run_episode_metrics(
    log: EpisodeLog,
    path: PlannedPath,
    reference: Trajectory | None = None,
    controller: str | None = None,
) -> MetricsRecord:
    """
    Aggregates ``log`` into a :class:`MetricsRecord`.

    The reference error is measured against ``reference`` or, without one,
    against the polyline through the hover points of ``path``.
    """
    if len(log) == 0:
        raise ValueError("Cannot compute metrics of an empty log")

    attitudes = np.abs(log.attitudes)
    position_error = position_errors(log)
    polyline = reference.points if reference is not None else path.points
    reference_error = distance_to_polyline(log.positions, polyline)
    hover, cruise = mode_fractions(log)

    return MetricsRecord(
        controller=controller if controller is not None else log.label,
        mean_abs_pitch=degrees(float(np.mean(attitudes[:, 1]))),
        max_position_error=float(np.max(position_error)),
        mean_position_error=float(np.mean(position_error)),
        max_abs_pitch=degrees(float(np.max(attitudes[:, 1]))),
        mean_abs_roll=degrees(float(np.mean(attitudes[:, 0]))),
        max_abs_roll=degrees(float(np.max(attitudes[:, 0]))),
        max_reference_error=float(np.max(reference_error)),
        mean_reference_error=float(np.mean(reference_error)),
        hover_fraction=hover,
        cruise_fraction=cruise,
        completed=log.completed,
        duration=log.duration,
        steps=len(log),
        status=log.status.value,
    )


def combine_metrics(records: Sequence[MetricsRecord], controller: str | None = None) -> MetricsRecord:
    """
    Combines the records of consecutive segments of one flight: means are
    weighted by step counts, maxima are the maximum of the maxima.
    """
    if not records:
        raise ValueError("At least one record is required")
    weights = np.array([record.steps for record in records], dtype=np.float64)
    if weights.sum() <= 0:
        raise ValueError("Records without steps can't be combined")

    def mean(name: str) -> float:
        return float(np.average([getattr(record, name) for record in records], weights=weights))

    def maximum(name: str) -> float:
        return float(max(getattr(record, name) for record in records))

    hover = mean("hover_fraction")
    return MetricsRecord(
        controller=controller if controller is not None else records[0].controller,
        mean_abs_pitch=mean("mean_abs_pitch"),
        max_position_error=maximum("max_position_error"),
        mean_position_error=mean("mean_position_error"),
        max_abs_pitch=maximum("max_abs_pitch"),
        mean_abs_roll=mean("mean_abs_roll"),
        max_abs_roll=maximum("max_abs_roll"),
        max_reference_error=maximum("max_reference_error"),
        mean_reference_error=mean("mean_reference_error"),
        hover_fraction=hover,
        cruise_fraction=1.0 - hover,
        completed=records[-1].completed,
        duration=float(sum(record.duration for record in records)),
        steps=int(weights.sum()),
        status=records[-1].status,
    )


def flight_profile(log: EpisodeLog) -> pd.DataFrame:
    """Translation, tracking error, pitch and tilt per step, angles in degrees."""
    positions = log.positions
    return pd.DataFrame(
        {
            "time": log.times,
            "x": positions[:, 0],
            "y": positions[:, 1],
            "altitude": -positions[:, 2],
            "position_error": position_errors(log),
            "pitch_deg": np.degrees(log.attitudes[:, 1]),
            "mean_tilt_deg": np.degrees(log.mean_tilts),
            "target_index": log.target_indices,
            "mode": [row.mode for row in log.rows],
        },
    )


# ==============================================================================
#       C O M P A R I S O N   A N D   S W E E P
# ==============================================================================


def compare_controllers(
    path: PlannedPath,
    model: ActorCritic,
    gains: DualLoopGains,
    env: HoverEnv,
    *,
    reference: Trajectory | None = None,
    trained_range: float | None = None,
    seed: int | None = None,
    max_steps: int | None = None,
) -> list[MetricsRecord]:
    """Flies ``path`` with the PID baseline and the trained policy, in that order."""
    pid_log = pid_execute(path, gains, env, seed=seed, max_steps=max_steps)
    policy_log = st3m_execute(path, model, env, trained_range=trained_range, seed=seed, max_steps=max_steps)
    return [
        run_episode_metrics(pid_log, path, reference, controller="Dual Loop PID"),
        run_episode_metrics(policy_log, path, reference, controller="ST3M"),
    ]


@dataclass(frozen=True)
class TradeoffRow:
    """Outcome of one target range: time cost, maximum error and hover fraction."""

    k: float
    present: bool
    completed: bool = False
    time_cost: float = float("nan")
    max_position_error: float = float("nan")
    mean_position_error: float = float("nan")
    hover_fraction: float = float("nan")
    spacing: float = float("nan")


TRADEOFF_COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(TradeoffRow))


@dataclass
class TradeoffTable:
    rows: list[TradeoffRow] = field(default_factory=list)

    def __len__(self: Self) -> int:
        return len(self.rows)

    @property
    def max_error_nondecreasing(self: Self) -> bool:
        """Whether the maximum error grows (weakly) with ``k`` over the present rows."""
        errors = [row.max_position_error for row in sorted(self.rows, key=lambda r: r.k) if row.present]
        return all(b >= a for a, b in zip(errors, errors[1:], strict=False))

    def to_frame(self: Self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(TRADEOFF_COLUMNS))


def tradeoff_row(k: float, record: MetricsRecord, spacing: float) -> TradeoffRow:
    return TradeoffRow(
        k=float(k),
        present=True,
        completed=record.completed,
        time_cost=record.duration,
        max_position_error=record.max_position_error,
        mean_position_error=record.mean_position_error,
        hover_fraction=record.hover_fraction,
        spacing=spacing,
    )


def sweep_target_range(
    k_values: Sequence[float],
    controllers: Mapping[float, ActorCritic | None],
    trajectory: Trajectory,
    env: HoverEnv,
    *,
    seed: int | None = None,
    max_steps: int | None = None,
) -> TradeoffTable:
    """
    Flies ``trajectory`` with the controller trained for each target range.

    The hover points of range ``k`` are spaced ``k`` apart, but never closer
    than the arrival radius. A range without a controller yields a row flagged
    as absent.
    """
    table = TradeoffTable()
    for k in k_values:
        model = controllers.get(k)
        if model is None:
            LOG.warning("No controller for k=%s, row flagged absent", k)
            table.rows.append(TradeoffRow(k=float(k), present=False))
            continue
        spacing = max(float(k), env.config.arrival_radius)
        path = balance_path(trajectory, spacing)
        log = st3m_execute(path, model, env, trained_range=max(float(k), spacing), seed=seed, max_steps=max_steps)
        record = run_episode_metrics(log, path, trajectory, controller=f"k={k:g}")
        LOG.info(
            " - k=%g: time %.2f s, max error %.3f m, hover %.1f %%",
            k,
            record.duration,
            record.max_position_error,
            100.0 * record.hover_fraction,
        )
        table.rows.append(tradeoff_row(k, record, spacing))

    if not table.max_error_nondecreasing:
        LOG.info("Maximum tracking error is not monotonic in k")
    return table


# ==============================================================================
#       C S V
# ==============================================================================


def _frame_of(item: Any) -> pd.DataFrame:  # noqa: ANN401
    if isinstance(item, pd.DataFrame):
        return item
    if isinstance(item, EpisodeLog):
        return item.to_frame()
    if isinstance(item, TradeoffTable):
        return item.to_frame()
    if isinstance(item, MetricsRecord):
        return pd.DataFrame([item.as_dict()], columns=list(METRICS_COLUMNS))
    if isinstance(item, list | tuple):
        if all(isinstance(entry, MetricsRecord) for entry in item):
            return pd.DataFrame([entry.as_dict() for entry in item], columns=list(METRICS_COLUMNS))
        if all(isinstance(entry, CurveRow) for entry in item):
            return pd.DataFrame([asdict(entry) for entry in item], columns=list(CURVE_COLUMNS))
    raise TypeError(f"Can't export objects of type {type(item).__name__}")


def export_csv(item: Any, destination: str | Path) -> Path:  # noqa: ANN401
    """
    Writes a record, a list of records, an episode log, a trade-off table, a
    training curve or a data frame as CSV with a header row.

    Column order is fixed per type and floats keep full precision, so the
    output is byte-stable for identical input.

    Raises:
        ExportError: if the destination can't be written.
    """
    destination = Path(destination)
    frame = _frame_of(item)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(destination, index=False, lineterminator="\n")
    except OSError as exc:
        raise ExportError(f"Unable to write CSV: {exc}", destination) from exc
    LOG.debug("Wrote %d rows to '%s'", len(frame), destination)
    return destination


def _read(source: str | Path, columns: Iterable[str]) -> pd.DataFrame:
    source = Path(source)
    try:
        frame = pd.read_csv(source, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise ExportError(f"Unable to read CSV: {exc}", source) from exc
    except pd.errors.EmptyDataError as exc:
        raise ExportError("CSV file is empty", source) from exc
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise ExportError(f"CSV is missing the columns {missing}", source)
    return frame


def read_metrics_csv(source: str | Path) -> list[MetricsRecord]:
    frame = _read(source, METRICS_COLUMNS)
    records = []
    for row in frame.to_dict(orient="records"):
        values = {name: row[name] for name in METRICS_COLUMNS}
        values["controller"] = str(values["controller"])
        values["completed"] = bool(values["completed"])
        values["steps"] = int(values["steps"])
        values["status"] = str(values["status"])
        records.append(MetricsRecord(**values))
    return records


def read_tradeoff_csv(source: str | Path) -> TradeoffTable:
    frame = _read(source, TRADEOFF_COLUMNS)
    rows = []
    for row in frame.to_dict(orient="records"):
        values = {name: row[name] for name in TRADEOFF_COLUMNS}
        values["present"] = bool(values["present"])
        values["completed"] = bool(values["completed"])
        rows.append(TradeoffRow(**values))
    return TradeoffTable(rows=rows)


def read_curve_csv(source: str | Path) -> list[CurveRow]:
    frame = _read(source, CURVE_COLUMNS)
    return [
        CurveRow(
            **{
                name: int(row[name]) if name in {"iteration", "env_steps"} else float(row[name])
                for name in CURVE_COLUMNS
            },
        )
        for row in frame.to_dict(orient="records")
    ]


def is_finite_record(record: MetricsRecord) -> bool:
    return all(
        isfinite(value)
        for value in (record.mean_abs_pitch, record.max_position_error, record.mean_position_error)
    )


def position_errors(log: EpisodeLog) -> NDArray[np.float64]:
    """Distance to the active hover target per step."""
    return np.linalg.norm(log.positions - log.targets, axis=1)
