# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Lifecycle of a telemetry bridge session.

::

    INITIALIZING -> RUNNING <-> DEGRADED
          |            |           |
          +-----> ERROR <----------+
          |         |
          +---------+--> SHUTDOWN_REQUESTED

A session is DEGRADED while the vehicle endpoint stays silent and returns to
RUNNING with the next valid telemetry frame. ERROR is left only by a shutdown.
"""

from collections.abc import Callable
from enum import Enum, auto
from logging import getLogger
from types import MappingProxyType
from typing import Self

LOG = getLogger(__name__)


class States(Enum):
    """Represents the state of a bridge session"""

    INITIALIZING = auto()
    RUNNING = auto()
    DEGRADED = auto()
    SHUTDOWN_REQUESTED = auto()
    ERROR = auto()


TRANSITIONS: MappingProxyType[States, frozenset[States]] = MappingProxyType(
    {
        States.INITIALIZING: frozenset({States.RUNNING, States.ERROR, States.SHUTDOWN_REQUESTED}),
        States.RUNNING: frozenset({States.DEGRADED, States.ERROR, States.SHUTDOWN_REQUESTED}),
        States.DEGRADED: frozenset({States.RUNNING, States.ERROR, States.SHUTDOWN_REQUESTED}),
        States.ERROR: frozenset({States.SHUTDOWN_REQUESTED}),
        States.SHUTDOWN_REQUESTED: frozenset(),
    },
)

#: States in which the tick loop of a session must stop.
STOPPING_STATES: frozenset[States] = frozenset({States.ERROR, States.SHUTDOWN_REQUESTED})

SESSION_FACTS: tuple[str, ...] = ("endpoint_connected", "telemetry_seen")


class StateMachine:
    """
    Guards the state of a bridge session.

    Besides the state, the machine keeps boolean facts about the session
    (``endpoint_connected``, ``telemetry_seen``) and the sequence of
    transitions taken so far.
    """

    def __init__(self: Self, initial_state: States = States.INITIALIZING) -> None:
        self._state = initial_state
        self._callbacks: dict[States, list[Callable[[], None]]] = {}
        self._facts = dict.fromkeys(SESSION_FACTS, False)
        self._history: list[tuple[States, States]] = []

    @property
    def state(self: Self) -> States:
        return self._state

    @property
    def stopping(self: Self) -> bool:
        """True once the session has to leave its tick loop."""
        return self._state in STOPPING_STATES

    @property
    def history(self: Self) -> tuple[tuple[States, States], ...]:
        """Transitions taken so far as ``(from, to)`` pairs."""
        return tuple(self._history)

    def transition_to(self: Self, new_state: States) -> None:
        """
        Moves the session to ``new_state`` and runs its callbacks.

        Staying in the current state is a no-op.

        Raises:
            ValueError: if ``new_state`` can't be reached from the current state.
        """
        if new_state == self._state:
            return
        if new_state not in TRANSITIONS[self._state]:
            raise ValueError(f"Invalid state transition from {self._state} to {new_state}")

        LOG.debug("Session state %s -> %s", self._state.name, new_state.name)
        self._history.append((self._state, new_state))
        self._state = new_state
        for callback in self._callbacks.get(new_state, []):
            callback()

    def count_entries(self: Self, state: States) -> int:
        """Number of times the session entered ``state``."""
        return sum(1 for _, target in self._history if target == state)

    @property
    def facts(self: Self) -> dict[str, bool]:
        return self._facts

    @facts.setter
    def facts(self: Self, new_facts: dict[str, bool]) -> None:
        unknown = set(new_facts) - set(self._facts)
        if unknown:
            raise KeyError(f"Fact '{unknown.pop()}' does not exist in the state machine.")
        self._facts.update(new_facts)

    def register_callback(self: Self, to_state: States, callback: Callable[[], None]) -> None:
        """Runs ``callback`` whenever the session enters ``to_state``."""
        self._callbacks.setdefault(to_state, []).append(callback)
