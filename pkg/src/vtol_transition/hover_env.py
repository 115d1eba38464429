# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Episodic hover environment wrapping the vehicle dynamics.

The agent observes its attitude, squashed velocities and rates, the offset to
the current hover target and its previous (normalized) command. Each step it
outputs five normalized actuator values in ``[-1, 1]``. The reward favours an
upright attitude and penalizes translational and angular motion. Whenever the
vehicle arrives within ``arrival_radius`` of the target, the target performs a
random-walk step of range ``k`` per axis.

Every instance is single-threaded and owns its own random generator, so multiple
instances can run in parallel without sharing state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from logging import getLogger
from math import isfinite, radians
from typing import TYPE_CHECKING, Self

import numpy as np

from vtol_transition.dynamics import (
    ActuatorCommand,
    BodyState,
    VehicleParams,
    body_z_alignment,
    integrate_step,
    solve_trim,
)
from vtol_transition.exceptions import ConfigurationError, DivergenceError, SingularityError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

LOG = getLogger(__name__)

OBSERVATION_SIZE: int = 17
ACTION_SIZE: int = 5

#: Wing-rotor tilt separating hover mode (inclusive) from cruise mode.
HOVER_TILT_LIMIT: float = radians(60.0)


class TerminationStatus(Enum):
    """Outcome of the termination check after an environment step."""

    RUNNING = "running"
    HORIZON = "horizon"
    CRASH_ATTITUDE = "crash-attitude"
    OUT_OF_BOUNDS = "out-of-bounds"
    DIVERGED = "diverged"

    @property
    def is_failure(self: Self) -> bool:
        return self in {
            TerminationStatus.CRASH_ATTITUDE,
            TerminationStatus.OUT_OF_BOUNDS,
            TerminationStatus.DIVERGED,
        }


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the velocity and rate penalties and the alignment reward."""

    w_v: float = 0.2
    w_omega: float = 0.1
    r_proj_scale: float = 1.0

    def __post_init__(self: Self) -> None:
        for name in ("w_v", "w_omega", "r_proj_scale"):
            if getattr(self, name) < 0:
                raise ConfigurationError("Reward weights must be >= 0", key=name)


@dataclass(frozen=True)
class EpisodeConfig:
    """
    Episode layout of the hover environment.

    Attributes:
        k: target random-walk range per axis (m).
        horizon: maximum number of steps ``T`` per episode.
        arrival_radius: distance to the target counting as arrival (m).
        crash_attitude: bound on ``|phi|`` and ``|theta|`` (rad).
        position_bound: bound on the distance from the episode origin (m).
        seed: seed of the instance's random generator.
        spawn_position_noise: uniform spawn offset per axis (m).
        spawn_attitude_noise: uniform roll/pitch perturbation at spawn (rad).
        spawn_velocity_noise: uniform body velocity perturbation at spawn (m/s).
    """

    k: float = 0.0
    horizon: int = 2000
    arrival_radius: float = 1.0
    crash_attitude: float = radians(80.0)
    position_bound: float = 100.0
    seed: int | None = None
    spawn_position_noise: float = 1.0
    spawn_attitude_noise: float = 0.1
    spawn_velocity_noise: float = 0.5

    def __post_init__(self: Self) -> None:
        if self.k < 0:
            raise ConfigurationError("Target range k must be >= 0", key="k")
        if self.horizon <= 0:
            raise ConfigurationError("Episode horizon must be > 0", key="horizon")
        if self.arrival_radius <= 0:
            raise ConfigurationError("Arrival radius must be > 0", key="arrival_radius")
        if not 0 < self.crash_attitude < np.pi / 2:
            raise ConfigurationError("Crash attitude bound must lie in (0, pi/2)", key="crash_attitude")
        if self.position_bound <= 0:
            raise ConfigurationError("Position bound must be > 0", key="position_bound")


@dataclass(frozen=True, eq=False)
class StepInfo:
    """Diagnostics returned next to each transition."""

    delta_position: NDArray[np.float64]
    tilt_angle: float
    pitch: float
    mode: str
    status: TerminationStatus
    command: ActuatorCommand
    arrived: bool = False
    target: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    @property
    def crashed(self: Self) -> bool:
        return self.status.is_failure


# ==============================================================================
#       A C T I O N   M A P P I N G
# ==============================================================================


def denormalize_action(action: Sequence[float] | NDArray[np.float64], params: VehicleParams) -> ActuatorCommand:
    """Maps ``[-1, 1]^5`` affinely onto ``[0, omega_max]^3 x [mu_min, mu_max]^2``."""
    a = np.clip(np.nan_to_num(np.asarray(action, dtype=np.float64), nan=0.0), -1.0, 1.0)
    unit = 0.5 * (a + 1.0)
    omegas = unit[:3] * params.omega_max
    tilts = params.mu_min + unit[3:] * (params.mu_max - params.mu_min)
    command = ActuatorCommand.from_array(np.concatenate((omegas, tilts)))
    # Rounding of the affine map must not push a command past its limits.
    return command if command.within_limits(params) else command.clamp(params)


def normalize_command(cmd: ActuatorCommand, params: VehicleParams) -> NDArray[np.float64]:
    """Inverse of :func:`denormalize_action`."""
    values = cmd.as_array()
    unit = np.empty(ACTION_SIZE)
    unit[:3] = values[:3] / params.omega_max
    unit[3:] = (values[3:] - params.mu_min) / (params.mu_max - params.mu_min)
    return 2.0 * unit - 1.0


def classify_mode(mean_tilt: float) -> str:
    """``hover`` for a mean tilt up to 60 degrees, ``cruise`` above."""
    return "hover" if mean_tilt <= HOVER_TILT_LIMIT else "cruise"


# ==============================================================================
#       O B S E R V A T I O N ,   R E W A R D ,   T E R M I N A T I O N
# ==============================================================================


def build_observation(
    state: BodyState,
    target: Sequence[float] | NDArray[np.float64],
    prev: ActuatorCommand,
    params: VehicleParams,
) -> NDArray[np.float64]:
    """
    Returns the 17-element observation
    ``[I, 0.25 tanh(V), tanh(omega), P_target - P, S_prev]``.
    """
    return np.concatenate(
        (
            state.attitude,
            0.25 * np.tanh(state.velocity),
            np.tanh(state.rates),
            np.asarray(target, dtype=np.float64) - state.position,
            normalize_command(prev, params),
        ),
    )


def step_reward(state: BodyState, weights: RewardWeights) -> float:
    """Alignment reward minus the velocity and angular rate penalties."""
    return (
        body_z_alignment(state.attitude) * weights.r_proj_scale
        - weights.w_v * float(np.linalg.norm(state.velocity))
        - weights.w_omega * float(np.linalg.norm(state.rates))
    )


def advance_target(
    target: Sequence[float] | NDArray[np.float64],
    k: float,
    rng: np.random.Generator,
) -> NDArray[np.float64]:
    """Moves the target by an independent ``U[0, k)`` sample on every axis."""
    if k < 0:
        raise ValueError(f"Target range k must be >= 0, got {k}")
    target = np.array(target, dtype=np.float64)
    if k == 0:
        return target
    return target + rng.uniform(0.0, k, size=3)


def check_termination(state: BodyState, step: int, config: EpisodeConfig) -> TerminationStatus:
    """Classifies the state after ``step`` steps of an episode."""
    if not state.is_finite():
        return TerminationStatus.DIVERGED
    if abs(state.attitude[0]) > config.crash_attitude or abs(state.attitude[1]) > config.crash_attitude:
        return TerminationStatus.CRASH_ATTITUDE
    if float(np.linalg.norm(state.position)) > config.position_bound:
        return TerminationStatus.OUT_OF_BOUNDS
    if step >= config.horizon:
        return TerminationStatus.HORIZON
    return TerminationStatus.RUNNING


# ==============================================================================
#       E N V I R O N M E N T
# ==============================================================================


class HoverEnv:
    """
    Hover environment around a (moving) target point.

    The vehicle spawns near the origin at the trim attitude and rotor speeds,
    perturbed by the spawn noise of the episode config. With ``random_walk``
    enabled, the target advances by :func:`advance_target` on every arrival;
    path executors disable it and set targets explicitly.
    """

    def __init__(
        self: Self,
        params: VehicleParams | None = None,
        config: EpisodeConfig | None = None,
        weights: RewardWeights | None = None,
        *,
        random_walk: bool = True,
    ) -> None:
        self.params = params or VehicleParams()
        self.config = config or EpisodeConfig()
        self.weights = weights or RewardWeights()
        self.random_walk = random_walk

        self.trim = solve_trim(self.params)
        self.rng = np.random.default_rng(self.config.seed)

        self.state: BodyState = self.trim.state()
        self.target: NDArray[np.float64] = np.zeros(3)
        self.prev_command: ActuatorCommand = self.trim.command()
        self.steps: int = 0
        self.status: TerminationStatus = TerminationStatus.RUNNING

    def reset(
        self: Self,
        seed: int | None = None,
        *,
        position: Sequence[float] | NDArray[np.float64] | None = None,
        target: Sequence[float] | NDArray[np.float64] | None = None,
        noise: bool = True,
    ) -> NDArray[np.float64]:
        """Starts a new episode and returns the first observation."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)

        cfg = self.config
        origin = np.zeros(3) if position is None else np.asarray(position, dtype=np.float64)
        velocity = np.zeros(3)
        attitude = np.array([self.trim.phi_trim, self.trim.theta_trim, 0.0])
        if noise:
            origin = origin + self.rng.uniform(-cfg.spawn_position_noise, cfg.spawn_position_noise, size=3)
            velocity = self.rng.uniform(-cfg.spawn_velocity_noise, cfg.spawn_velocity_noise, size=3)
            attitude[:2] += self.rng.uniform(-cfg.spawn_attitude_noise, cfg.spawn_attitude_noise, size=2)

        self.state = BodyState(position=origin, velocity=velocity, attitude=attitude)
        self.target = np.zeros(3) if target is None else np.array(target, dtype=np.float64)
        self.prev_command = self.trim.command()
        self.steps = 0
        self.status = TerminationStatus.RUNNING
        LOG.debug("Episode reset: spawn=%s target=%s", self.state.position, self.target)
        return self.observation()

    def observation(self: Self) -> NDArray[np.float64]:
        return build_observation(self.state, self.target, self.prev_command, self.params)

    def set_target(self: Self, target: Sequence[float] | NDArray[np.float64]) -> None:
        self.target = np.array(target, dtype=np.float64)

    @property
    def distance_to_target(self: Self) -> float:
        return float(np.linalg.norm(self.target - self.state.position))

    def step(
        self: Self,
        action: Sequence[float] | NDArray[np.float64],
    ) -> tuple[NDArray[np.float64], float, bool, StepInfo]:
        """
        Applies one normalized action and advances the dynamics by one step.

        Numeric divergence of the dynamics terminates the episode with the
        ``diverged`` status instead of raising.
        """
        if self.status is not TerminationStatus.RUNNING:
            raise RuntimeError("Episode is terminated, call reset() first")

        command = denormalize_action(action, self.params)
        self.steps += 1
        try:
            self.state = integrate_step(self.state, command, self.params)
            reward = step_reward(self.state, self.weights)
            status = check_termination(self.state, self.steps, self.config)
        except (DivergenceError, SingularityError) as exc:
            LOG.debug("Dynamics diverged at step %d: %s", self.steps, exc)
            reward = 0.0
            status = TerminationStatus.DIVERGED
        if not isfinite(reward):
            reward, status = 0.0, TerminationStatus.DIVERGED

        self.prev_command = command
        self.status = status

        arrived = status is TerminationStatus.RUNNING and self.distance_to_target <= self.config.arrival_radius
        if arrived and self.random_walk:
            self.target = advance_target(self.target, self.config.k, self.rng)

        info = StepInfo(
            delta_position=self.target - self.state.position,
            tilt_angle=command.mean_tilt,
            pitch=float(self.state.attitude[1]),
            mode=classify_mode(command.mean_tilt),
            status=status,
            command=command,
            arrived=arrived,
            target=self.target.copy(),
        )
        return self.observation(), reward, status is not TerminationStatus.RUNNING, info
