# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Ground-station bridge and simulated vehicle endpoint over loopback datagrams.

The bridge ticks at a fixed rate, asks its controller for the latest actuator
command and sends it as a command frame. Telemetry frames arriving from the
vehicle are validated and handed to the controller on its next tick. The
vehicle endpoint integrates the dynamics at the same rate, applying the latest
valid command and holding it when frames go missing.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from logging import getLogger
from typing import TYPE_CHECKING, Self

import numpy as np

from vtol_transition.dynamics import (
    ActuatorCommand,
    BodyState,
    VehicleParams,
    body_acceleration,
    integrate_step,
    solve_trim,
    with_timestep,
)
from vtol_transition.exceptions import (
    BridgeStateError,
    DivergenceError,
    FrameError,
    LinkConnectionError,
    SingularityError,
)
from vtol_transition.state_machine import StateMachine, States
from vtol_transition.telemetry import (
    SEQUENCE_MODULUS,
    CommandFrame,
    TelemetryFrame,
    decode_frame,
    encode_frame,
    sequence_newer,
)

if TYPE_CHECKING:
    from collections.abc import Callable

LOG = getLogger(__name__)

#: Ticks end with a cooperative spin over this window for sub-millisecond timing.
SPIN_WINDOW: float = 0.002


async def sleep_until(deadline: float) -> None:
    """Sleeps until the event loop clock reaches ``deadline``."""
    loop = asyncio.get_running_loop()
    remaining = deadline - loop.time()
    if remaining > SPIN_WINDOW:
        await asyncio.sleep(remaining - SPIN_WINDOW)
    while loop.time() < deadline:
        await asyncio.sleep(0)


class _FrameProtocol(asyncio.DatagramProtocol):
    """Forwards datagrams and transport errors to its owner."""

    def __init__(
        self: Self,
        on_datagram: Callable[[bytes, tuple[str, int]], None],
        on_error: Callable[[Exception], None],
    ) -> None:
        self.on_datagram = on_datagram
        self.on_error = on_error

    def datagram_received(self: Self, data: bytes, addr: tuple[str, int]) -> None:
        self.on_datagram(data, addr)

    def error_received(self: Self, exc: Exception) -> None:
        self.on_error(exc)


class SequenceFilter:
    """Accepts only frames whose sequence number advances."""

    def __init__(self: Self) -> None:
        self.last: int | None = None

    def accept(self: Self, seq: int) -> bool:
        if self.last is not None and not sequence_newer(seq, self.last):
            return False
        self.last = seq
        return True


# ==============================================================================
#       V E H I C L E   E N D P O I N T
# ==============================================================================


@dataclass
class EndpointStats:
    ticks: int = 0
    received: int = 0
    rejected: int = 0
    out_of_order: int = 0
    stale_ticks: int = 0
    zero_throttle_ticks: int = 0
    telemetry_sent: int = 0
    resets: int = 0


class SimEndpoint:
    """
    Simulated vehicle listening for command frames.

    Every tick the latest valid command is applied for one step; after
    ``zero_after`` consecutive ticks without a fresh frame the rotors are
    stopped instead (``None`` holds the last command forever). The vehicle
    answers with a telemetry frame per tick once a ground station is known,
    unless it is ``silent``.
    """

    def __init__(
        self: Self,
        params: VehicleParams | None = None,
        rate_hz: float = 100.0,
        *,
        host: str = "127.0.0.1",
        port: int = 0,
        zero_after: int | None = None,
        silent: bool = False,
    ) -> None:
        if rate_hz <= 0:
            raise ValueError(f"Tick rate must be > 0, got {rate_hz}")
        self.params = with_timestep(params or VehicleParams(), 1.0 / rate_hz)
        self.rate_hz = rate_hz
        self.host = host
        self.port = port
        self.zero_after = zero_after
        self.silent = silent

        self.trim = solve_trim(self.params)
        self.state: BodyState = self.trim.state()
        self.command: ActuatorCommand = self.trim.command()
        self.stats = EndpointStats()

        self._filter = SequenceFilter()
        self._fresh = False
        self._missed = 0
        self._peer: tuple[str, int] | None = None
        self._seq = 0
        self._transport: asyncio.DatagramTransport | None = None
        self._task: asyncio.Task[None] | None = None

    @property
    def address(self: Self) -> tuple[str, int]:
        if self._transport is None:
            raise BridgeStateError("Endpoint is not started")
        host, port = self._transport.get_extra_info("sockname")[:2]
        return host, port

    async def start(self: Self) -> tuple[str, int]:
        loop = asyncio.get_running_loop()
        self._transport, _ = await loop.create_datagram_endpoint(
            lambda: _FrameProtocol(self._on_datagram, self._on_error),
            local_addr=(self.host, self.port),
        )
        self._task = asyncio.create_task(self._tick_loop())
        LOG.info("Vehicle endpoint listening on %s:%d", *self.address)
        return self.address

    async def stop(self: Self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
            self._task = None
        if self._transport is not None:
            self._transport.close()
            self._transport = None

    async def __aenter__(self: Self) -> Self:
        await self.start()
        return self

    async def __aexit__(self: Self, *_: object) -> None:
        await self.stop()

    def _on_error(self: Self, exc: Exception) -> None:
        LOG.debug("Vehicle endpoint transport error: %s", exc)

    def _on_datagram(self: Self, data: bytes, addr: tuple[str, int]) -> None:
        try:
            frame = decode_frame(data)
        except FrameError as exc:
            self.stats.rejected += 1
            LOG.debug("Rejected frame (code %d): %s", exc.code, exc)
            return
        if not isinstance(frame, CommandFrame):
            self.stats.rejected += 1
            return
        if not self._filter.accept(frame.seq):
            self.stats.out_of_order += 1
            return

        self.stats.received += 1
        self._peer = addr
        self.command = frame.to_command().clamp(self.params)
        self._fresh = True

    def _applied_command(self: Self) -> ActuatorCommand:
        if self._fresh:
            self._fresh = False
            self._missed = 0
            return self.command
        self._missed += 1
        self.stats.stale_ticks += 1
        if self.zero_after is not None and self._missed > self.zero_after:
            self.stats.zero_throttle_ticks += 1
            return ActuatorCommand.idle(self.params)
        return self.command

    def step(self: Self) -> TelemetryFrame:
        """Advances the vehicle by one tick and returns its telemetry."""
        command = self._applied_command()
        try:
            self.state = integrate_step(self.state, command, self.params)
            accel = body_acceleration(self.state, command, self.params)
        except (DivergenceError, SingularityError) as exc:
            LOG.warning("Simulated vehicle diverged (%s), resetting to trim", exc)
            self.stats.resets += 1
            self.state = self.trim.state()
            accel = np.zeros(3)
        self.stats.ticks += 1
        frame = TelemetryFrame(self._seq, *(float(value) for value in accel))
        self._seq = (self._seq + 1) % SEQUENCE_MODULUS
        return frame

    async def _tick_loop(self: Self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.rate_hz
        start = loop.time()
        tick = 0
        while True:
            tick += 1
            await sleep_until(start + tick * period)
            frame = self.step()
            if not self.silent and self._peer is not None and self._transport is not None:
                self._transport.sendto(encode_frame(frame), self._peer)
                self.stats.telemetry_sent += 1


# ==============================================================================
#       G R O U N D   S T A T I O N
# ==============================================================================


class HoldCommand:
    """Controller that always returns the same command, e.g. the trim command."""

    def __init__(self: Self, command: ActuatorCommand) -> None:
        self.command = command
        self.telemetry: list[TelemetryFrame] = []

    def __call__(self: Self, telemetry: TelemetryFrame | None) -> ActuatorCommand:
        if telemetry is not None:
            self.telemetry.append(telemetry)
        return self.command


@dataclass
class SessionStats:
    """Counters and tick timing of a bridge session."""

    ticks: int = 0
    sent: int = 0
    received: int = 0
    dropped: int = 0
    rejected: int = 0
    out_of_order: int = 0
    send_errors: int = 0
    degraded_ticks: int = 0
    degraded_periods: int = 0
    jitter_p50: float = 0.0
    jitter_p99: float = 0.0
    jitter_max: float = 0.0
    duration: float = 0.0
    final_state: str = ""
    jitter: list[float] = field(default_factory=list, repr=False)

    def summarize_jitter(self: Self) -> None:
        if self.jitter:
            samples = np.asarray(self.jitter)
            self.jitter_p50 = float(np.percentile(samples, 50))
            self.jitter_p99 = float(np.percentile(samples, 99))
            self.jitter_max = float(samples.max())


class TelemetryBridge:
    """
    Ground-station side of the link.

    The session runs through the states of :class:`StateMachine`: it turns
    ``DEGRADED`` after ``degraded_after`` ticks without telemetry and back to
    ``RUNNING`` on the next valid frame. Downlink frames can be dropped on
    purpose with ``drop_probability`` using a generator seeded by ``seed``.
    """

    def __init__(
        self: Self,
        controller: Callable[[TelemetryFrame | None], ActuatorCommand],
        endpoint: tuple[str, int],
        rate_hz: float = 100.0,
        *,
        drop_probability: float = 0.0,
        seed: int | None = None,
        degraded_after: int = 10,
    ) -> None:
        if rate_hz <= 0:
            raise ValueError(f"Tick rate must be > 0, got {rate_hz}")
        if not 0.0 <= drop_probability < 1.0:
            raise ValueError(f"Drop probability must lie in [0, 1), got {drop_probability}")

        self.controller = controller
        self.endpoint = endpoint
        self.rate_hz = rate_hz
        self.drop_probability = drop_probability
        self.degraded_after = degraded_after
        self.rng = np.random.default_rng(seed)

        self.stats = SessionStats()
        self.state_machine = StateMachine(initial_state=States.INITIALIZING)
        self.__stop_event: asyncio.Event = asyncio.Event()
        self.state_machine.register_callback(States.SHUTDOWN_REQUESTED, self.__stop_event.set)
        self.state_machine.register_callback(States.ERROR, self.__stop_event.set)

        self._filter = SequenceFilter()
        self._latest: TelemetryFrame | None = None
        self._silent_ticks = 0
        self._refused: ConnectionRefusedError | None = None
        self._transport: asyncio.DatagramTransport | None = None

    def request_shutdown(self: Self) -> None:
        if not self.state_machine.stopping:
            self.state_machine.transition_to(States.SHUTDOWN_REQUESTED)

    def _on_error(self: Self, exc: Exception) -> None:
        self.stats.send_errors += 1
        if isinstance(exc, ConnectionRefusedError) and not self.state_machine.facts["telemetry_seen"]:
            self._refused = exc
        LOG.debug("Bridge transport error: %s", exc)

    def _check_refused(self: Self) -> None:
        # UDP connect always succeeds, a closed port only shows up as ICMP refusals.
        if self._refused is not None:
            raise LinkConnectionError(
                f"Vehicle endpoint {self.endpoint} refused the link before sending telemetry",
            ) from self._refused

    def _on_datagram(self: Self, data: bytes, _addr: tuple[str, int]) -> None:
        try:
            frame = decode_frame(data)
        except FrameError as exc:
            self.stats.rejected += 1
            LOG.debug("Rejected telemetry (code %d): %s", exc.code, exc)
            return
        if not isinstance(frame, TelemetryFrame):
            self.stats.rejected += 1
            return
        if not self._filter.accept(frame.seq):
            self.stats.out_of_order += 1
            return
        self.stats.received += 1
        self._latest = frame

    async def _connect(self: Self) -> None:
        loop = asyncio.get_running_loop()
        try:
            self._transport, _ = await loop.create_datagram_endpoint(
                lambda: _FrameProtocol(self._on_datagram, self._on_error),
                remote_addr=self.endpoint,
            )
        except (OSError, OverflowError) as exc:
            self.state_machine.transition_to(States.ERROR)
            raise LinkConnectionError(f"Unable to reach the vehicle endpoint {self.endpoint}: {exc}") from exc
        self.state_machine.facts = {"endpoint_connected": True}

    def _tick(self: Self, seq: int) -> None:
        telemetry, self._latest = self._latest, None
        if telemetry is None:
            self._silent_ticks += 1
        else:
            self._silent_ticks = 0
            self.state_machine.facts = {"telemetry_seen": True}

        if self._silent_ticks > self.degraded_after:
            if self.state_machine.state == States.RUNNING:
                LOG.warning("No telemetry for %d ticks, link degraded", self._silent_ticks)
                self.state_machine.transition_to(States.DEGRADED)
        elif self.state_machine.state == States.DEGRADED:
            LOG.info("Telemetry restored")
            self.state_machine.transition_to(States.RUNNING)
        if self.state_machine.state == States.DEGRADED:
            self.stats.degraded_ticks += 1

        command = self.controller(telemetry)
        if self.drop_probability and self.rng.random() < self.drop_probability:
            self.stats.dropped += 1
            return
        if self._transport is not None:
            self._transport.sendto(encode_frame(CommandFrame.from_command(seq, command)))
            self.stats.sent += 1

    async def run(self: Self, duration: float) -> SessionStats:
        """
        Runs the session for ``duration`` seconds or until a shutdown is requested.

        Raises:
            LinkConnectionError: if the endpoint can't be reached at start or refuses
                the link before its first telemetry frame.
        """
        LOG.info("Starting bridge session to %s:%s at %.1f Hz", *self.endpoint, self.rate_hz)
        await self._connect()
        self.state_machine.transition_to(States.RUNNING)

        loop = asyncio.get_running_loop()
        period = 1.0 / self.rate_hz
        n_ticks = round(duration * self.rate_hz)
        start = loop.time()
        try:
            for tick in range(n_ticks):
                if self.__stop_event.is_set():
                    break
                deadline = start + tick * period
                await sleep_until(deadline)
                self.stats.jitter.append(loop.time() - deadline)
                self._tick(tick % SEQUENCE_MODULUS)
                self.stats.ticks += 1
                self._check_refused()
            self._check_refused()
        except Exception as exc:
            LOG.error("Bridge session failed.", exc_info=exc)
            self.state_machine.transition_to(States.ERROR)
            raise
        finally:
            if self._transport is not None:
                self._transport.close()
                self._transport = None

        self.stats.duration = loop.time() - start
        self.request_shutdown()
        self.stats.final_state = self.state_machine.state.name
        self.stats.degraded_periods = self.state_machine.count_entries(States.DEGRADED)
        self.stats.summarize_jitter()
        LOG.info(
            " - sent %d, received %d, dropped %d, degraded ticks %d, jitter p99 %.3f ms",
            self.stats.sent,
            self.stats.received,
            self.stats.dropped,
            self.stats.degraded_ticks,
            1e3 * self.stats.jitter_p99,
        )
        return self.stats


async def bridge_loop(
    controller: Callable[[TelemetryFrame | None], ActuatorCommand],
    sim_endpoint: tuple[str, int],
    rate_hz: float = 100.0,
    *,
    duration: float = 1.0,
    drop_probability: float = 0.0,
    seed: int | None = None,
    degraded_after: int = 10,
) -> SessionStats:
    """Runs one bridge session against ``sim_endpoint`` and returns its statistics."""
    bridge = TelemetryBridge(
        controller,
        sim_endpoint,
        rate_hz,
        drop_probability=drop_probability,
        seed=seed,
        degraded_after=degraded_after,
    )
    return await bridge.run(duration)
