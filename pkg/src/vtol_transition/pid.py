# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Dual-loop PID baseline.

Three outer position loops produce an earth-frame acceleration demand, which
is turned into roll and pitch references (around the trim pitch) and a thrust
reference. Three inner attitude loops produce angular acceleration demands.
The mixer allocates the resulting force and moment demand to the rotors.

Allocation works on the thrust components of the rotors, main rotor thrust
``T1`` and the vertical and forward parts ``V``/``H`` of both wing rotors. In
these variables the rotor wrench is linear; the force and moment demand is
solved for them in the least-squares sense and converted back to rotor speeds
and tilts, which are finally clamped to the actuator limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger
from math import atan2, cos, pi, sin, sqrt
from typing import TYPE_CHECKING, Self

import numpy as np

from vtol_transition.dynamics import ActuatorCommand, BodyState, VehicleParams, body_to_earth, solve_trim
from vtol_transition.exceptions import ConfigurationError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

LOG = getLogger(__name__)


@dataclass(frozen=True)
class PidGains:
    """Gains and clamps of a single PID channel."""

    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0
    output_limit: float = 1.0

    def __post_init__(self: Self) -> None:
        if min(self.kp, self.ki, self.kd) < 0:
            raise ConfigurationError(f"PID gains must be >= 0, got {self}")
        if self.integral_limit <= 0 or self.output_limit <= 0:
            raise ConfigurationError(f"PID clamps must be > 0, got {self}")


@dataclass(frozen=True)
class PidChannelState:
    integral: float = 0.0
    prev_error: float = 0.0


def pid_step(
    error: float,
    state: PidChannelState,
    gains: PidGains,
    dt: float,
    derivative: float | None = None,
) -> tuple[float, PidChannelState]:
    """
    One update of a PID channel.

    The integral of the error is clamped to ``+-integral_limit`` and the output
    to ``+-output_limit``. ``derivative`` replaces the finite difference of the
    error, e.g. with a measured rate.
    """
    if dt <= 0:
        raise ValueError(f"PID step dt must be > 0, got {dt}")
    integral = float(np.clip(state.integral + error * dt, -gains.integral_limit, gains.integral_limit))
    if derivative is None:
        derivative = (error - state.prev_error) / dt
    output = gains.kp * error + gains.ki * integral + gains.kd * derivative
    output = float(np.clip(output, -gains.output_limit, gains.output_limit))
    return output, PidChannelState(integral=integral, prev_error=error)


# ==============================================================================
#       D U A L   L O O P
# ==============================================================================


@dataclass(frozen=True)
class DualLoopGains:
    """
    Gains of the six channels.

    The outer channels map position error (m) to acceleration demand (m/s^2),
    the inner ones attitude error (rad) to angular acceleration (rad/s^2).
    """

    x: PidGains = field(default_factory=lambda: PidGains(1.0, 0.05, 1.8, 2.0, 3.0))
    y: PidGains = field(default_factory=lambda: PidGains(1.0, 0.05, 1.8, 2.0, 3.0))
    z: PidGains = field(default_factory=lambda: PidGains(2.0, 0.3, 2.6, 2.0, 5.0))
    roll: PidGains = field(default_factory=lambda: PidGains(64.0, 2.0, 12.8, 0.2, 50.0))
    pitch: PidGains = field(default_factory=lambda: PidGains(64.0, 2.0, 12.8, 0.2, 50.0))
    yaw: PidGains = field(default_factory=lambda: PidGains(4.0, 0.0, 4.0, 0.5, 2.0))
    max_tilt: float = 0.35

    def __post_init__(self: Self) -> None:
        if not 0 < self.max_tilt < pi / 2:
            raise ConfigurationError("max_tilt must lie in (0, pi/2)", key="max_tilt")

    @property
    def channels(self: Self) -> tuple[PidGains, ...]:
        return (self.x, self.y, self.z, self.roll, self.pitch, self.yaw)


@dataclass(frozen=True)
class DualLoopState:
    """Integrators and previous errors of the channels x, y, z, roll, pitch, yaw."""

    channels: tuple[PidChannelState, ...] = tuple(PidChannelState() for _ in range(6))

    def __post_init__(self: Self) -> None:
        if len(self.channels) != 6:
            raise ValueError("A dual-loop state holds exactly six channels")


@dataclass(frozen=True, eq=False)
class DualLoopOutput:
    """Command plus the references that produced it."""

    command: ActuatorCommand
    attitude_reference: NDArray[np.float64]
    thrust_reference: float
    force_demand: NDArray[np.float64]
    moment_demand: NDArray[np.float64]


def _wrap(angle: float) -> float:
    return (angle + pi) % (2.0 * pi) - pi


def allocation_matrix(params: VehicleParams) -> NDArray[np.float64]:
    """
    Maps the rotor thrust components ``(T1, V2, V3, H2, H3)`` to the demand
    ``(Fz, Mx, My, Mz)``.
    """
    c = params.K_M / params.K_F
    l1, l2, l3 = params.l1, params.l2, params.l3
    return np.array(
        [
            [-1.0, -1.0, -1.0, 0.0, 0.0],
            [0.0, -l3, l3, 0.0, 0.0],
            [l1, -l2, -l2, 0.0, 0.0],
            [-c, c, -c, l3, l3],
        ],
    )


def mix(
    fz: float,
    moment: Sequence[float] | NDArray[np.float64],
    params: VehicleParams,
) -> ActuatorCommand:
    """
    Allocates a thrust and moment demand to the actuators.

    The forward force is not allocated; it follows from the yaw moment. Rotor
    speeds and tilts outside of the limits are saturated.
    """
    demand = np.array([fz, *moment], dtype=np.float64)
    components, *_ = np.linalg.lstsq(allocation_matrix(params), demand, rcond=None)
    t1, v2, v3, h2, h3 = (float(value) for value in components)

    k_f = params.K_F
    omega1 = sqrt(max(t1, 0.0) / k_f)
    omega2 = sqrt(sqrt(v2**2 + h2**2) / k_f)
    omega3 = sqrt(sqrt(v3**2 + h3**2) / k_f)
    mu_a = atan2(h2, v2) if omega2 > 0 else params.mu_min
    mu_b = atan2(h3, v3) if omega3 > 0 else params.mu_min
    command = ActuatorCommand(omega1=omega1, omega2=omega2, omega3=omega3, mu_a=mu_a, mu_b=mu_b)
    if not command.within_limits(params):
        LOG.debug("Mixer saturated: %s", command)
        command = command.clamp(params)
    return command


class DualLoopController:
    """
    Cascade of outer position and inner attitude PID loops.

    Instances are single-threaded; :meth:`control` is also available as the
    pure function :func:`dual_loop_control`.
    """

    def __init__(self: Self, params: VehicleParams | None = None, gains: DualLoopGains | None = None) -> None:
        self.params = params or VehicleParams()
        self.gains = gains or DualLoopGains()
        self.theta_trim = solve_trim(self.params).theta_trim
        self.state = DualLoopState()

    def reset(self: Self) -> None:
        self.state = DualLoopState()

    def control(
        self: Self,
        body: BodyState,
        target: Sequence[float] | NDArray[np.float64],
        loop_state: DualLoopState,
        dt: float,
    ) -> tuple[DualLoopOutput, DualLoopState]:
        params, gains = self.params, self.gains
        phi, theta, psi = (float(angle) for angle in body.attitude)
        channels = list(loop_state.channels)

        # Outer loop, earth frame (z down).
        earth_velocity = body_to_earth(body.attitude) @ body.velocity
        error = np.asarray(target, dtype=np.float64) - body.position
        accel = np.zeros(3)
        for axis, axis_gains in enumerate((gains.x, gains.y, gains.z)):
            accel[axis], channels[axis] = pid_step(
                float(error[axis]),
                channels[axis],
                axis_gains,
                dt,
                derivative=-float(earth_velocity[axis]),
            )

        forward = cos(psi) * accel[0] + sin(psi) * accel[1]
        right = -sin(psi) * accel[0] + cos(psi) * accel[1]
        phi_ref = float(np.clip(right / params.g, -gains.max_tilt, gains.max_tilt))
        theta_ref = self.theta_trim + float(np.clip(-forward / params.g, -gains.max_tilt, gains.max_tilt))
        psi_ref = 0.0

        # Thrust along body z; equals the trim thrust when level at trim.
        cos_trim = cos(self.theta_trim)
        tilt_factor = max(cos(phi) * cos(theta) / cos_trim, 0.5)
        thrust = params.m * (params.g - accel[2]) * cos_trim / tilt_factor
        thrust = float(np.clip(thrust, 0.0, params.max_total_thrust))

        # Inner loop.
        attitude_errors = (phi_ref - phi, theta_ref - theta, _wrap(psi_ref - psi))
        angular_accel = np.zeros(3)
        for axis, axis_gains in enumerate((gains.roll, gains.pitch, gains.yaw)):
            angular_accel[axis], channels[3 + axis] = pid_step(
                attitude_errors[axis],
                channels[3 + axis],
                axis_gains,
                dt,
                derivative=-float(body.rates[axis]),
            )
        moment = np.array([params.Jx, params.Jy, params.Jz]) * angular_accel

        command = mix(-thrust, moment, params)
        output = DualLoopOutput(
            command=command,
            attitude_reference=np.array([phi_ref, theta_ref, psi_ref]),
            thrust_reference=thrust,
            force_demand=np.array([0.0, 0.0, -thrust]),
            moment_demand=moment,
        )
        return output, DualLoopState(channels=tuple(channels))

    def __call__(self: Self, body: BodyState, target: Sequence[float] | NDArray[np.float64]) -> ActuatorCommand:
        """Stateful variant advancing the controller's own loop state by ``params.dt``."""
        output, self.state = self.control(body, target, self.state, self.params.dt)
        return output.command


def dual_loop_control(
    state: BodyState,
    target: Sequence[float] | NDArray[np.float64],
    loop_state: DualLoopState,
    dt: float,
    params: VehicleParams | None = None,
    gains: DualLoopGains | None = None,
) -> tuple[ActuatorCommand, DualLoopState]:
    """Pure dual-loop update: returns the clamped command and the new loop state."""
    output, new_state = DualLoopController(params, gains).control(state, target, loop_state, dt)
    return output.command, new_state
