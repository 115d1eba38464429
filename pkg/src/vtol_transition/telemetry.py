# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Wire format of the ground-station link.

Both frame types are little-endian and laid out as::

    magic (u8) | sequence (u16) | payload (n x f32) | checksum (u16)

Command frames (magic ``0xC5``) carry the five actuator values and are 25 bytes
long; telemetry frames (magic ``0x7E``) carry the three body accelerations and
are 17 bytes long. The checksum is the 16-bit ones-complement of the
ones-complement sum of the little-endian words of sequence and payload.
"""

from __future__ import annotations

import struct
from dataclasses import astuple, dataclass
from math import isfinite
from typing import TYPE_CHECKING, Self

from vtol_transition.dynamics import ActuatorCommand
from vtol_transition.exceptions import FrameChecksumError, FrameLengthError, FrameMagicError

if TYPE_CHECKING:
    from collections.abc import Sequence

COMMAND_MAGIC: int = 0xC5
TELEMETRY_MAGIC: int = 0x7E

_COMMAND_BODY = struct.Struct("<H5f")
_TELEMETRY_BODY = struct.Struct("<H3f")
_CHECKSUM = struct.Struct("<H")

COMMAND_FRAME_SIZE: int = 1 + _COMMAND_BODY.size + _CHECKSUM.size
TELEMETRY_FRAME_SIZE: int = 1 + _TELEMETRY_BODY.size + _CHECKSUM.size

SEQUENCE_MODULUS: int = 1 << 16


def checksum(data: bytes) -> int:
    """16-bit ones-complement checksum over little-endian words."""
    if len(data) % 2:
        data += b"\x00"
    total = 0
    for (word,) in struct.iter_unpack("<H", data):
        total += word
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def sequence_newer(candidate: int, reference: int) -> bool:
    """Whether ``candidate`` follows ``reference`` in 16-bit serial number order."""
    delta = (candidate - reference) % SEQUENCE_MODULUS
    return 0 < delta < SEQUENCE_MODULUS // 2


def _check_fields(seq: int, values: Sequence[float]) -> None:
    if not 0 <= seq < SEQUENCE_MODULUS:
        raise ValueError(f"Sequence number must fit into 16 bits, got {seq}")
    if not all(isfinite(value) for value in values):
        raise ValueError(f"Frame payload must be finite, got {values}")


@dataclass(frozen=True)
class CommandFrame:
    """Downlink frame with rotor speeds (rad/s) and tilt angles (rad)."""

    seq: int
    omega1: float
    omega2: float
    omega3: float
    mu_a: float
    mu_b: float

    @property
    def payload(self: Self) -> tuple[float, ...]:
        return astuple(self)[1:]

    @classmethod
    def from_command(cls: type[CommandFrame], seq: int, command: ActuatorCommand) -> CommandFrame:
        return cls(seq % SEQUENCE_MODULUS, *(float(value) for value in command.as_array()))

    def to_command(self: Self) -> ActuatorCommand:
        return ActuatorCommand.from_array(self.payload)


@dataclass(frozen=True)
class TelemetryFrame:
    """Uplink frame with the body accelerations (m/s^2)."""

    seq: int
    ax: float
    ay: float
    az: float

    @property
    def payload(self: Self) -> tuple[float, ...]:
        return astuple(self)[1:]


def encode_frame(frame: CommandFrame | TelemetryFrame) -> bytes:
    """
    Serializes a frame. Payload values are rounded to single precision.

    Raises:
        ValueError: for a sequence number outside of 16 bits or a non-finite
            payload.
    """
    _check_fields(frame.seq, frame.payload)
    if isinstance(frame, CommandFrame):
        magic, body = COMMAND_MAGIC, _COMMAND_BODY.pack(frame.seq, *frame.payload)
    else:
        magic, body = TELEMETRY_MAGIC, _TELEMETRY_BODY.pack(frame.seq, *frame.payload)
    return bytes((magic,)) + body + _CHECKSUM.pack(checksum(body))


def decode_frame(data: bytes) -> CommandFrame | TelemetryFrame:
    """
    Parses a command or telemetry frame.

    Raises:
        FrameLengthError: if the buffer length matches no frame type or not the
            type announced by its magic byte.
        FrameMagicError: for an unknown magic byte.
        FrameChecksumError: if the checksum does not verify.
    """
    data = bytes(data)
    if len(data) not in {COMMAND_FRAME_SIZE, TELEMETRY_FRAME_SIZE}:
        raise FrameLengthError(f"Unexpected frame length {len(data)}")

    magic = data[0]
    if magic == COMMAND_MAGIC:
        expected, layout = COMMAND_FRAME_SIZE, _COMMAND_BODY
    elif magic == TELEMETRY_MAGIC:
        expected, layout = TELEMETRY_FRAME_SIZE, _TELEMETRY_BODY
    else:
        raise FrameMagicError(f"Unknown magic byte 0x{magic:02X}")
    if len(data) != expected:
        raise FrameLengthError(f"Frame with magic 0x{magic:02X} must be {expected} bytes, got {len(data)}")

    body = data[1:-2]
    (received,) = _CHECKSUM.unpack(data[-2:])
    if checksum(body) != received:
        raise FrameChecksumError(f"Checksum mismatch: computed 0x{checksum(body):04X}, received 0x{received:04X}")

    seq, *values = layout.unpack(body)
    if magic == COMMAND_MAGIC:
        return CommandFrame(seq, *values)
    return TelemetryFrame(seq, *values)
