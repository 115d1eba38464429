# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Six degree of freedom model of the tri-rotor tilt VTOL UAV.

The vehicle carries one fixed main rotor on the longitudinal axis (rotor 1) and
two tilting wing rotors (rotors 2 and 3). Every rotor produces the thrust
``K_F * Omega**2`` and the drag moment ``K_M * Omega**2``. The wing rotors tilt
forward by ``mu_a`` (left) and ``mu_b`` (right), where ``0`` is vertical thrust.

Body and earth frames follow the north-east-down convention: the body ``z`` axis
points down, thrust enters ``F_z`` with a negative sign and the gravity vector
projected into the body frame is ``m g (-sin(theta), sin(phi) cos(theta),
cos(phi) cos(theta))``. Altitude is ``-z``.

All functions in this module are pure: they only read their arguments and never
mutate shared state, so they can be evaluated from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from logging import getLogger
from math import atan, cos, isfinite, pi, sin, sqrt, tan
from typing import TYPE_CHECKING, Self

import numpy as np

from vtol_transition.exceptions import (
    ActuatorRangeError,
    ConfigurationError,
    DivergenceError,
    InfeasibleTrimError,
    SingularityError,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

LOG = getLogger(__name__)

#: Distance of the pitch angle from +-pi/2 at which the kinematics are singular.
GIMBAL_EPSILON: float = 1e-3

_DEFAULT_MASS: float = 1.0
_DEFAULT_G: float = 9.81
_DEFAULT_OMEGA_MAX: float = 2200.0
# Thrust-to-weight ratio of 4 at full speed of all three rotors.
_DEFAULT_K_F: float = 4.0 * _DEFAULT_MASS * _DEFAULT_G / (3.0 * _DEFAULT_OMEGA_MAX**2)


@dataclass(frozen=True)
class VehicleParams:
    """
    Physical parameters of the vehicle in SI units.

    Arm lengths, rotor constants and inertias are not published for the
    reference airframe (700 mm body, 500 mm span, 1 kg, thrust-to-weight ratio
    of 4). The defaults are estimates consistent with these dimensions.
    """

    m: float = _DEFAULT_MASS
    Jx: float = 0.015
    Jy: float = 0.025
    Jz: float = 0.035
    l1: float = 0.25
    l2: float = 0.15
    l3: float = 0.25
    K_F: float = _DEFAULT_K_F
    K_M: float = 0.02 * _DEFAULT_K_F
    g: float = _DEFAULT_G
    omega_max: float = _DEFAULT_OMEGA_MAX
    mu_min: float = 0.0
    mu_max: float = pi / 2
    dt: float = 0.01

    def __post_init__(self: Self) -> None:
        for name in ("m", "Jx", "Jy", "Jz", "l1", "l2", "l3", "K_F", "K_M", "g", "omega_max", "dt"):
            value = getattr(self, name)
            if not isfinite(value) or value <= 0:
                raise ConfigurationError(f"Vehicle parameter must be finite and > 0, got {value}", key=name)
        if not 0.0 <= self.mu_min < self.mu_max <= pi / 2:
            raise ConfigurationError(
                f"Tilt limits must satisfy 0 <= mu_min < mu_max <= pi/2, got [{self.mu_min}, {self.mu_max}]",
                key="mu_min",
            )
        # Relative tolerance, the default K_F is defined by exactly this bound.
        if 3.0 * self.K_F * self.omega_max**2 < 4.0 * self.m * self.g * (1.0 - 1e-12):
            raise ConfigurationError(
                "Rotor constants must provide a thrust-to-weight ratio of at least 4",
                key="K_F",
            )

    @property
    def max_total_thrust(self: Self) -> float:
        """Thrust of all three rotors at the rotor speed limit (N)."""
        return 3.0 * self.K_F * self.omega_max**2


@dataclass(frozen=True, eq=False)
class BodyState:
    """
    Full rigid-body state.

    Attributes:
        position: earth-frame position ``(x, y, z)`` in m, ``z`` pointing down.
        velocity: body-frame velocity ``(u, v, w)`` in m/s.
        attitude: Euler angles ``(phi, theta, psi)`` in rad.
        rates: body angular rates ``(p, q, r)`` in rad/s.
    """

    position: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    velocity: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    attitude: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    rates: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self: Self) -> None:
        for name in ("position", "velocity", "attitude", "rates"):
            value = np.array(getattr(self, name), dtype=np.float64)
            if value.shape != (3,):
                raise ValueError(f"BodyState.{name} must have shape (3,), got {value.shape}")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def as_vector(self: Self) -> NDArray[np.float64]:
        """The state as a 12-vector ``[P, V, I, omega]``."""
        return np.concatenate((self.position, self.velocity, self.attitude, self.rates))

    @classmethod
    def from_vector(cls: type[BodyState], vector: NDArray[np.float64]) -> BodyState:
        """Build a state from a 12-vector ``[P, V, I, omega]``."""
        return cls(
            position=vector[0:3],
            velocity=vector[3:6],
            attitude=vector[6:9],
            rates=vector[9:12],
        )

    def is_finite(self: Self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))

    def __eq__(self: Self, other: object) -> bool:
        if not isinstance(other, BodyState):
            return NotImplemented
        return bool(np.array_equal(self.as_vector(), other.as_vector()))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BodyStateDerivative:
    """Time derivative of a :class:`BodyState`, field by field."""

    position_rate: NDArray[np.float64]
    velocity_rate: NDArray[np.float64]
    attitude_rate: NDArray[np.float64]
    rates_rate: NDArray[np.float64]

    def as_vector(self: Self) -> NDArray[np.float64]:
        return np.concatenate(
            (self.position_rate, self.velocity_rate, self.attitude_rate, self.rates_rate),
        )


@dataclass(frozen=True)
class ActuatorCommand:
    """Rotor speeds (rad/s) and wing-rotor tilt angles (rad)."""

    omega1: float
    omega2: float
    omega3: float
    mu_a: float
    mu_b: float

    def as_array(self: Self) -> NDArray[np.float64]:
        return np.array([self.omega1, self.omega2, self.omega3, self.mu_a, self.mu_b], dtype=np.float64)

    @classmethod
    def from_array(cls: type[ActuatorCommand], values: Sequence[float] | NDArray[np.float64]) -> ActuatorCommand:
        omega1, omega2, omega3, mu_a, mu_b = (float(value) for value in values)
        return cls(omega1=omega1, omega2=omega2, omega3=omega3, mu_a=mu_a, mu_b=mu_b)

    @classmethod
    def idle(cls: type[ActuatorCommand], params: VehicleParams) -> ActuatorCommand:
        """All rotors stopped, wing rotors at their lowest tilt."""
        return cls(omega1=0.0, omega2=0.0, omega3=0.0, mu_a=params.mu_min, mu_b=params.mu_min)

    @property
    def mean_tilt(self: Self) -> float:
        return 0.5 * (self.mu_a + self.mu_b)

    def within_limits(self: Self, params: VehicleParams) -> bool:
        omegas = (self.omega1, self.omega2, self.omega3)
        tilts = (self.mu_a, self.mu_b)
        return all(0.0 <= omega <= params.omega_max for omega in omegas) and all(
            params.mu_min <= mu <= params.mu_max for mu in tilts
        )

    def clamp(self: Self, params: VehicleParams) -> ActuatorCommand:
        """The nearest command within the actuator limits."""
        lower = np.array([0.0, 0.0, 0.0, params.mu_min, params.mu_min])
        upper = np.array([params.omega_max] * 3 + [params.mu_max] * 2)
        values = np.nan_to_num(self.as_array(), nan=0.0)
        return ActuatorCommand.from_array(np.clip(values, lower, upper))


@dataclass(frozen=True, eq=False)
class BodyWrench:
    """Body-frame rotor force (N) and moment (N m)."""

    force: NDArray[np.float64]
    moment: NDArray[np.float64]


@dataclass(frozen=True)
class TrimSolution:
    """Hover equilibrium attitude, tilt and rotor speeds."""

    phi_trim: float
    theta_trim: float
    mu_trim: float
    omega1_trim: float
    omega2_trim: float
    omega3_trim: float

    def command(self: Self) -> ActuatorCommand:
        return ActuatorCommand(
            omega1=self.omega1_trim,
            omega2=self.omega2_trim,
            omega3=self.omega3_trim,
            mu_a=self.mu_trim,
            mu_b=self.mu_trim,
        )

    def state(
        self: Self,
        position: Sequence[float] | NDArray[np.float64] = (0.0, 0.0, 0.0),
        psi: float = 0.0,
    ) -> BodyState:
        """The motionless equilibrium state at ``position``."""
        return BodyState(
            position=np.asarray(position, dtype=np.float64),
            attitude=np.array([self.phi_trim, self.theta_trim, psi]),
        )


# ==============================================================================
#       R O T O R   W R E N C H
# ==============================================================================


def rotor_wrench(cmd: ActuatorCommand, params: VehicleParams) -> BodyWrench:
    """
    Returns the body-frame force and moment produced by the three rotors.

    The wing rotors may carry different tilt angles. With ``mu_a == mu_b`` the
    result is the symmetric tri-rotor wrench used by the trim analysis.

    Raises:
        ActuatorRangeError: if the command exceeds the actuator limits. Commands
            are never clamped at this layer.
    """
    if not cmd.within_limits(params):
        raise ActuatorRangeError(f"Actuator command out of range: {cmd}")

    K_F, K_M = params.K_F, params.K_M
    sq1, sq2, sq3 = cmd.omega1**2, cmd.omega2**2, cmd.omega3**2
    ca, sa = cos(cmd.mu_a), sin(cmd.mu_a)
    cb, sb = cos(cmd.mu_b), sin(cmd.mu_b)

    force = np.array(
        [
            K_F * (sq2 * sa + sq3 * sb),
            0.0,
            -K_F * (sq2 * ca + sq3 * cb + sq1),
        ],
    )
    moment = np.array(
        [
            -params.l3 * K_F * (sq2 * ca - sq3 * cb),
            -params.l2 * K_F * (sq2 * ca + sq3 * cb) + params.l1 * K_F * sq1,
            params.l3 * K_F * (sq2 * sa + sq3 * sb) - K_M * sq1 + K_M * (sq2 * ca - sq3 * cb),
        ],
    )
    return BodyWrench(force=force, moment=moment)


# ==============================================================================
#       E Q U A T I O N S   O F   M O T I O N
# ==============================================================================


def body_to_earth(attitude: Sequence[float] | NDArray[np.float64]) -> NDArray[np.float64]:
    """Z-Y-X rotation matrix taking body-frame vectors to the earth frame."""
    phi, theta, psi = attitude
    cphi, sphi = cos(phi), sin(phi)
    cth, sth = cos(theta), sin(theta)
    cpsi, spsi = cos(psi), sin(psi)
    return np.array(
        [
            [cth * cpsi, sphi * sth * cpsi - cphi * spsi, cphi * sth * cpsi + sphi * spsi],
            [cth * spsi, sphi * sth * spsi + cphi * cpsi, cphi * sth * spsi - sphi * cpsi],
            [-sth, sphi * cth, cphi * cth],
        ],
    )


def _derivative_vector(
    x: NDArray[np.float64],
    wrench: BodyWrench,
    params: VehicleParams,
) -> NDArray[np.float64]:
    """Right-hand side of the equations of motion on the packed 12-vector."""
    phi, theta = x[6], x[7]
    if abs(theta) >= pi / 2 - GIMBAL_EPSILON:
        raise SingularityError(f"Pitch angle {theta:.6f} rad reached the gimbal guard")

    p, q, r = x[9], x[10], x[11]
    cphi, sphi = cos(phi), sin(phi)
    cth, sth = cos(theta), sin(theta)
    mg = params.m * params.g

    force = wrench.force
    moment = wrench.moment
    velocity_rate = (
        np.array(
            [
                force[0] - mg * sth,
                force[1] + mg * sphi * cth,
                force[2] + mg * cphi * cth,
            ],
        )
        / params.m
    )
    rates_rate = np.array(
        [
            (moment[0] - (params.Jz - params.Jy) * q * r) / params.Jx,
            (moment[1] - (params.Jx - params.Jz) * p * r) / params.Jy,
            (moment[2] - (params.Jy - params.Jx) * p * q) / params.Jz,
        ],
    )
    tth = tan(theta)
    attitude_rate = np.array(
        [
            p + sphi * tth * q + cphi * tth * r,
            cphi * q - sphi * r,
            (sphi * q + cphi * r) / cth,
        ],
    )
    position_rate = body_to_earth(x[6:9]) @ x[3:6]
    return np.concatenate((position_rate, velocity_rate, attitude_rate, rates_rate))


def state_derivative(
    state: BodyState,
    wrench: BodyWrench,
    params: VehicleParams,
) -> BodyStateDerivative:
    """
    Evaluates the nonlinear rigid-body equations under the given rotor wrench.

    Translational accelerations follow from the rotor force plus gravity, the
    angular accelerations include the gyroscopic cross terms and the attitude
    rates follow the Euler kinematics.

    Raises:
        SingularityError: if ``|theta|`` reached the gimbal guard.
    """
    derivative = _derivative_vector(state.as_vector(), wrench, params)
    return BodyStateDerivative(
        position_rate=derivative[0:3],
        velocity_rate=derivative[3:6],
        attitude_rate=derivative[6:9],
        rates_rate=derivative[9:12],
    )


def integrate_step(
    state: BodyState,
    cmd: ActuatorCommand,
    params: VehicleParams,
) -> BodyState:
    """
    Advances the state by ``params.dt`` with the classical 4th-order Runge-Kutta
    scheme. The command is held constant over the step.

    Raises:
        SingularityError: if an intermediate stage reached the gimbal guard.
        DivergenceError: if the result is not finite.
    """
    wrench = rotor_wrench(cmd, params)
    dt = params.dt
    x = state.as_vector()

    with np.errstate(over="ignore", invalid="ignore"):
        k1 = _derivative_vector(x, wrench, params)
        k2 = _derivative_vector(x + 0.5 * dt * k1, wrench, params)
        k3 = _derivative_vector(x + 0.5 * dt * k2, wrench, params)
        k4 = _derivative_vector(x + dt * k3, wrench, params)
        x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(x_next)):
        raise DivergenceError("Integration step produced a non-finite state")
    return BodyState.from_vector(x_next)


def body_acceleration(
    state: BodyState,
    cmd: ActuatorCommand,
    params: VehicleParams,
) -> NDArray[np.float64]:
    """Body-frame translational acceleration ``(du, dv, dw)`` in m/s^2."""
    return state_derivative(state, rotor_wrench(cmd, params), params).velocity_rate


def body_z_alignment(attitude: Sequence[float] | NDArray[np.float64]) -> float:
    """
    Signed alignment of the body ``z`` axis with the earth ``z`` axis.

    Equals ``cos(phi) cos(theta)``: ``1`` for a level vehicle, ``0`` for a
    vehicle pitched by 90 degrees and ``-1`` for an inverted one.
    """
    phi, theta = attitude[0], attitude[1]
    return float(np.clip(cos(phi) * cos(theta), -1.0, 1.0))


# ==============================================================================
#       T R I M
# ==============================================================================


def solve_trim(params: VehicleParams) -> TrimSolution:
    """
    Returns the closed-form hover equilibrium of the vehicle.

    The main rotor's drag moment is balanced by the yaw moment of the forward
    tilted wing rotors, whose forward force component is in turn balanced by a
    slight nose-up pitch attitude.

    Raises:
        InfeasibleTrimError: if a trim rotor speed exceeds ``omega_max``.
    """
    l1, l2, l3 = params.l1, params.l2, params.l3
    K_F, K_M = params.K_F, params.K_M
    mg = params.m * params.g

    theta = atan(l2 * K_M / (l3 * (l1 + l2) * K_F))
    mu = atan(l2 * K_M / (l1 * l3 * K_F))
    omega1 = sqrt(l2 * mg * cos(theta) / ((l1 + l2) * K_F))
    omega2 = sqrt(l1 * mg * cos(theta) / (2.0 * (l1 + l2) * K_F * cos(mu)))

    if max(omega1, omega2) > params.omega_max:
        raise InfeasibleTrimError(
            f"Trim rotor speeds ({omega1:.1f}, {omega2:.1f}) rad/s exceed the limit {params.omega_max} rad/s",
        )
    if not params.mu_min <= mu <= params.mu_max:
        raise InfeasibleTrimError(
            f"Trim tilt {mu:.6f} rad is outside of [{params.mu_min}, {params.mu_max}]",
        )

    LOG.debug("Trim: theta=%.6f rad, mu=%.6f rad, omega1=%.3f, omega2=%.3f", theta, mu, omega1, omega2)
    return TrimSolution(
        phi_trim=0.0,
        theta_trim=theta,
        mu_trim=mu,
        omega1_trim=omega1,
        omega2_trim=omega2,
        omega3_trim=omega2,
    )


def trim_residual(params: VehicleParams, trim: TrimSolution | None = None) -> NDArray[np.float64]:
    """State derivative at the motionless trim state under the trim command."""
    trim = trim or solve_trim(params)
    return state_derivative(
        trim.state(),
        rotor_wrench(trim.command(), params),
        params,
    ).as_vector()


def with_timestep(params: VehicleParams, dt: float) -> VehicleParams:
    """A copy of ``params`` integrating with the step ``dt``."""
    return replace(params, dt=dt)
