# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Unit tests for the StateMachine class."""

from unittest.mock import Mock

import pytest

from vtol_transition.state_machine import StateMachine, States


@pytest.fixture
def state_machine() -> StateMachine:
    """Create a fresh StateMachine instance for each test"""
    return StateMachine()


def test_initialization_default(state_machine: StateMachine) -> None:
    """Test default initialization"""
    assert state_machine.state == States.INITIALIZING
    assert state_machine.facts["endpoint_connected"] is False
    assert state_machine.facts["telemetry_seen"] is False


def test_initialization_custom() -> None:
    """Test custom initialization with specific state"""
    sm = StateMachine(initial_state=States.DEGRADED)
    assert sm.state == States.DEGRADED


def test_valid_state_transitions(state_machine: StateMachine) -> None:
    """Test valid state transitions"""
    # INITIALIZING -> RUNNING
    state_machine.transition_to(States.RUNNING)
    assert state_machine.state == States.RUNNING

    # RUNNING -> DEGRADED -> RUNNING (telemetry restored)
    state_machine.transition_to(States.DEGRADED)
    assert state_machine.state == States.DEGRADED
    state_machine.transition_to(States.RUNNING)
    assert state_machine.state == States.RUNNING

    # RUNNING -> ERROR
    state_machine.transition_to(States.ERROR)
    assert state_machine.state == States.ERROR

    # ERROR -> SHUTDOWN_REQUESTED
    state_machine.transition_to(States.SHUTDOWN_REQUESTED)
    assert state_machine.state == States.SHUTDOWN_REQUESTED


def test_error_is_not_recoverable() -> None:
    """A failed session can only shut down"""
    sm = StateMachine(initial_state=States.ERROR)
    with pytest.raises(ValueError, match=r"Invalid state transition.*"):
        sm.transition_to(States.RUNNING)


def test_invalid_transition_shutdown_to_running() -> None:
    """Test invalid transition from SHUTDOWN_REQUESTED to RUNNING"""
    sm = StateMachine(initial_state=States.SHUTDOWN_REQUESTED)
    with pytest.raises(ValueError, match=r"Invalid state transition.*"):
        sm.transition_to(States.RUNNING)


def test_invalid_transition_initializing_to_degraded(state_machine: StateMachine) -> None:
    """A session can't degrade before it is running"""
    with pytest.raises(ValueError, match=r"Invalid state transition from.*"):
        state_machine.transition_to(States.DEGRADED)


def test_invalid_transition_to_invalid_state(state_machine: StateMachine) -> None:
    """Test transition to non-existent state"""
    with pytest.raises(ValueError, match=r"Invalid state transition from.*"):
        state_machine.transition_to("INVALID_STATE")  # type: ignore[arg-type]


def test_same_state_transition(state_machine: StateMachine) -> None:
    """Test transition to the same state (should be no-op)"""
    state_machine.transition_to(States.RUNNING)
    state_machine.transition_to(States.RUNNING)
    assert state_machine.state == States.RUNNING


def test_facts_setter(state_machine: StateMachine) -> None:
    """Test setting facts"""
    state_machine.facts = {"endpoint_connected": True}
    assert state_machine.facts["endpoint_connected"] is True
    # Other facts should remain unchanged
    assert state_machine.facts["telemetry_seen"] is False


def test_facts_setter_invalid_key(state_machine: StateMachine) -> None:
    """Test setting a fact with an invalid key"""
    with pytest.raises(KeyError, match=r".*'non_existent_fact' does not exist.*"):
        state_machine.facts = {"non_existent_fact": True}


def test_callbacks_for_different_states(state_machine: StateMachine) -> None:
    """Test callbacks for different states are called appropriately"""
    degraded_cb = Mock()
    shutdown_cb = Mock()
    state_machine.register_callback(States.DEGRADED, degraded_cb)
    state_machine.register_callback(States.SHUTDOWN_REQUESTED, shutdown_cb)
    state_machine.register_callback(States.SHUTDOWN_REQUESTED, degraded_cb)

    state_machine.transition_to(States.RUNNING)
    degraded_cb.assert_not_called()

    state_machine.transition_to(States.DEGRADED)
    degraded_cb.assert_called_once()
    shutdown_cb.assert_not_called()

    degraded_cb.reset_mock()
    state_machine.transition_to(States.SHUTDOWN_REQUESTED)
    shutdown_cb.assert_called_once()
    degraded_cb.assert_called_once()


def test_fact_persistence_across_transitions(state_machine: StateMachine) -> None:
    """Test that facts are persistent across state transitions"""
    state_machine.facts = {"telemetry_seen": True}
    state_machine.transition_to(States.RUNNING)
    state_machine.transition_to(States.DEGRADED)
    assert state_machine.facts["telemetry_seen"] is True


def test_history_and_entries(state_machine: StateMachine) -> None:
    """Transitions are recorded, staying in a state is not"""
    state_machine.transition_to(States.RUNNING)
    state_machine.transition_to(States.DEGRADED)
    state_machine.transition_to(States.DEGRADED)
    state_machine.transition_to(States.RUNNING)
    state_machine.transition_to(States.DEGRADED)
    assert state_machine.history == (
        (States.INITIALIZING, States.RUNNING),
        (States.RUNNING, States.DEGRADED),
        (States.DEGRADED, States.RUNNING),
        (States.RUNNING, States.DEGRADED),
    )
    assert state_machine.count_entries(States.DEGRADED) == 2
    assert state_machine.count_entries(States.ERROR) == 0


def test_rejected_transition_is_not_recorded() -> None:
    sm = StateMachine(initial_state=States.ERROR)
    with pytest.raises(ValueError, match=r"Invalid state transition"):
        sm.transition_to(States.DEGRADED)
    assert sm.history == ()
    assert sm.state == States.ERROR


@pytest.mark.parametrize(
    ("state", "stopping"),
    [
        (States.INITIALIZING, False),
        (States.RUNNING, False),
        (States.DEGRADED, False),
        (States.ERROR, True),
        (States.SHUTDOWN_REQUESTED, True),
    ],
)
def test_stopping_states(state: States, stopping: bool) -> None:
    assert StateMachine(initial_state=state).stopping is stopping
