# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Custom exceptions for the VTOL transition workbench."""

from pathlib import Path
from typing import Self


class VtolTransitionError(Exception):
    """Base class of all errors raised by this package."""


class ConfigurationError(VtolTransitionError):
    """
    Raised when a configuration file or value is invalid.

    The file and the offending key are kept so that the command-line interface
    can report them.

    Attributes:
        path (Path | None): The configuration file, if any.
        key (str | None): The offending key, if any.
    """

    def __init__(
        self: Self,
        message: str,
        path: str | Path | None = None,
        key: str | None = None,
    ) -> None:
        self.message = message
        self.path = None if path is None else Path(path)
        self.key = key
        context = []
        if self.path is not None:
            context.append(f"file '{self.path}'")
        if key is not None:
            context.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(context)})" if context else message)


class ActuatorRangeError(VtolTransitionError):
    """An actuator command lies outside of the vehicle's actuator limits."""


class SingularityError(VtolTransitionError):
    """The pitch angle reached the gimbal guard of the Euler kinematics."""


class DivergenceError(VtolTransitionError):
    """The numeric integration produced a non-finite state."""


class InfeasibleTrimError(VtolTransitionError):
    """The hover trim requires a rotor speed above the rotor speed limit."""


class CorruptModelError(VtolTransitionError):
    """Policy or value weights are non-finite or a checkpoint is unreadable."""


class TrajectoryError(VtolTransitionError):
    """A trajectory is degenerate and can't be planned on."""


class ExportError(VtolTransitionError):
    """Writing or reading a result file failed."""

    def __init__(self: Self, message: str, path: str | Path) -> None:
        super().__init__(f"{message} ('{path}')")
        self.path = path


class FrameError(VtolTransitionError):
    """
    Base class for wire frame decoding errors.

    Every subclass carries a distinct integer ``code`` that is reported in the
    bridge session statistics.
    """

    code: int = 0


class FrameLengthError(FrameError):
    """The buffer does not have the exact frame length."""

    code = 1


class FrameMagicError(FrameError):
    """The buffer does not start with the expected magic byte."""

    code = 2


class FrameChecksumError(FrameError):
    """The checksum of the frame does not verify."""

    code = 3


class LinkConnectionError(VtolTransitionError):
    """The simulator endpoint is unreachable at the start of a session."""


class BridgeStateError(VtolTransitionError):
    """
    Custom exception for terminating a bridge session due to an error state.

    This exception must only be raised in functions within the running session
    loop, that would otherwise continue running after the session switched to
    the error state.

    Example:

    .. code-block:: python

        def func():
            try:
                do_something()
            except OSError as exc:
                message = "Exception while sending the command frame."
                LOG.error(msg=message, exc_info=exc)
                self.state_machine.transition_to(States.ERROR)
                raise BridgeStateError(message) from exc
    """
