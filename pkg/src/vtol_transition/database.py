# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Module implementing the run registry and handling of its interactions."""

from __future__ import annotations

from datetime import datetime
from importlib.metadata import PackageNotFoundError, version
from logging import getLogger
from typing import TYPE_CHECKING, Any, Self

import numpy as np
import torch
from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    insert,
    select,
    update,
)
from sqlalchemy.orm import sessionmaker

from vtol_transition.training import CURVE_COLUMNS, CurveRow

if TYPE_CHECKING:
    from sqlalchemy.engine.result import MappingResult
    from sqlalchemy.sql.elements import ColumnElement

LOG = getLogger(__name__)

RUN_STATUSES: tuple[str, ...] = ("running", "success", "failed")


def package_version() -> str:
    try:
        return version("vtol-transition")
    except PackageNotFoundError:
        return "0+unknown"


class DBConnect:
    """
    Connection to the SQLite run registry.

    The tables of this module share the connection and its metadata. Rows are
    always read in insertion order of their ``id`` column.
    """

    def __init__(
        self: Self,
        sqlite_file: str | None = None,
        in_memory: bool = False,
    ) -> None:
        if in_memory:
            url = "sqlite://"
        elif sqlite_file:
            url = f"sqlite:///{sqlite_file}"
        else:
            raise ValueError("Either a SQLite file or in_memory=True is required")
        LOG.info("Opening the run registry at '%s'...", ":memory:" if in_memory else sqlite_file)

        self.engine = create_engine(url)
        self.session = sessionmaker(bind=self.engine)()
        self.metadata = MetaData()

    def init_db(self: Self) -> None:
        """Create tables if they do not exist."""
        LOG.debug("- Initializing tables...")
        self.metadata.create_all(self.engine)

    @staticmethod
    def _matching(table: Table, filters: dict | None) -> list[ColumnElement[bool]]:
        return [table.c[column] == value for column, value in (filters or {}).items()]

    def add_row(self: Self, table: Table, **values: Any) -> None:
        """Insert a row into ``table`` and commit."""
        LOG.debug("Inserting a row into '%s': %s", table, values)
        self.session.execute(insert(table).values(**values))
        self.session.commit()

    def get_rows(
        self: Self,
        table: Table,
        filters: dict | None = None,
        newest_first: bool = False,
        limit: int | None = None,
    ) -> MappingResult:
        """Rows of ``table`` whose columns equal all ``filters``."""
        LOG.debug(
            "Querying '%s' with filters: %s, newest first: %s, limit: %s",
            table,
            filters,
            newest_first,
            limit,
        )
        query = select(table).order_by(table.c.id.desc() if newest_first else table.c.id.asc())
        if conditions := self._matching(table, filters):
            query = query.where(*conditions)
        if limit is not None:
            query = query.limit(limit)
        return self.session.execute(query).mappings()

    def update_row(self: Self, table: Table, filters: dict, updates: dict) -> None:
        """Set ``updates`` on every row matching ``filters`` and commit."""
        if not filters:
            raise ValueError("Refusing to update the registry without filters")
        LOG.debug("Updating '%s' where %s: %s", table, filters, updates)
        self.session.execute(update(table).where(*self._matching(table, filters)).values(**updates))
        self.session.commit()

    def close(self: Self) -> None:
        """Release the session and the pooled connections."""
        LOG.debug("Closing the run registry...")
        self.session.close()
        self.engine.dispose()


class RunManifests:
    """
    Table containing one manifest per command-line run.

    A manifest holds everything needed to reproduce a run: the seed, the
    hashes of the configuration files and the versions of the numeric stack.
    """

    def __init__(self: Self, db: DBConnect) -> None:
        LOG.debug("Initializing the run manifests table...")
        self.__db = db
        self.__table = Table(
            "run_manifests",
            db.metadata,
            Column("id", Integer, primary_key=True),
            Column("run_id", String, nullable=False, unique=True),
            Column("subcommand", String, nullable=False),
            Column("seed", Integer, nullable=False),
            Column("version", String, nullable=False),
            Column("torch_version", String, nullable=False),
            Column("numpy_version", String, nullable=False),
            Column("vehicle_hash", String, nullable=False),
            Column("gains_hash", String, nullable=False),
            Column("ppo_hash", String, nullable=False),
            Column("arguments", String, nullable=False, default=""),
            Column("started", DateTime, nullable=False),
            Column("finished", DateTime),
            Column("status", String, nullable=False, default="running"),
            extend_existing=True,
        )
        self.__table.create(bind=db.engine, checkfirst=True)

    def start(  # pylint: disable=too-many-positional-arguments
        self: Self,
        run_id: str,
        subcommand: str,
        seed: int,
        hashes: dict[str, str],
        arguments: str = "",
    ) -> None:
        """Registers a new run in state 'running'."""
        LOG.debug("Registering run '%s' (%s, seed %d)", run_id, subcommand, seed)
        self.__db.add_row(
            self.__table,
            run_id=run_id,
            subcommand=subcommand,
            seed=seed,
            version=package_version(),
            torch_version=torch.__version__,
            numpy_version=np.__version__,
            vehicle_hash=hashes["vehicle"],
            gains_hash=hashes["gains"],
            ppo_hash=hashes["ppo"],
            arguments=arguments,
            started=datetime.now(),
            status="running",
        )

    def finish(self: Self, run_id: str, status: str) -> None:
        """Marks a run as finished with ``status``."""
        if status not in RUN_STATUSES:
            raise ValueError(f"Unknown run status '{status}'")
        LOG.debug("Finishing run '%s' with status '%s'", run_id, status)
        self.__db.update_row(
            self.__table,
            filters={"run_id": run_id},
            updates={"finished": datetime.now(), "status": status},
        )

    def get(self: Self, run_id: str) -> dict:
        """Get the manifest of ``run_id``."""
        if row := self.__db.get_rows(self.__table, filters={"run_id": run_id}).fetchone():
            return dict(row)
        raise ValueError(f"No manifest found for run '{run_id}'!")

    def get_runs(
        self: Self,
        filters: dict | None = None,
        limit: int | None = None,
    ) -> list[dict]:
        """All manifests matching ``filters``, most recent first."""
        return [
            dict(row)
            for row in self.__db.get_rows(
                self.__table,
                filters=filters,
                newest_first=True,
                limit=limit,
            )
        ]


class TrainingCurve:
    """Table containing the training curve of the runs, one row per iteration."""

    def __init__(self: Self, run_id: str, db: DBConnect) -> None:
        LOG.debug("Initializing the training curve table...")
        self.__db = db
        self.__run_id = run_id
        self.__table = Table(
            "training_curve",
            db.metadata,
            Column("id", Integer, primary_key=True),
            Column("run_id", String, nullable=False),
            Column("stage_k", Float, nullable=False),
            Column("iteration", Integer, nullable=False),
            Column("env_steps", Integer, nullable=False),
            Column("eval_reward", Float),
            Column("policy_loss", Float),
            Column("value_loss", Float),
            Column("entropy", Float),
            Column("clip_fraction", Float),
            Column("approx_kl", Float),
            extend_existing=True,
        )
        self.__table.create(bind=db.engine, checkfirst=True)

    def add(self: Self, row: CurveRow) -> None:
        """Add a training iteration; NaN entries are stored as NULL."""
        values = {
            column: (None if isinstance(value, float) and np.isnan(value) else value)
            for column, value in ((column, getattr(row, column)) for column in CURVE_COLUMNS)
        }
        self.__db.add_row(self.__table, run_id=self.__run_id, **values)

    def get_rows(self: Self) -> list[CurveRow]:
        """The curve of this run in insertion order."""
        return [
            CurveRow(
                **{
                    column: (float("nan") if row[column] is None else row[column])
                    for column in CURVE_COLUMNS
                },
            )
            for row in self.__db.get_rows(
                self.__table,
                filters={"run_id": self.__run_id},
            )
        ]
