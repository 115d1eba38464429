# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Unit tests for the dual-loop PID baseline."""

from math import cos

import numpy as np
import pytest

from vtol_transition.dynamics import ActuatorCommand, BodyState, VehicleParams, integrate_step, solve_trim
from vtol_transition.exceptions import ConfigurationError
from vtol_transition.pid import (
    DualLoopController,
    DualLoopGains,
    DualLoopState,
    PidChannelState,
    PidGains,
    allocation_matrix,
    dual_loop_control,
    mix,
    pid_step,
)


def test_pid_step_terms() -> None:
    """Proportional, integral and derivative terms add up"""
    gains = PidGains(kp=2.0, ki=0.5, kd=0.1, integral_limit=10.0, output_limit=100.0)
    output, state = pid_step(1.0, PidChannelState(integral=1.0, prev_error=0.5), gains, 0.1)
    assert state.integral == pytest.approx(1.1)
    assert state.prev_error == 1.0
    assert output == pytest.approx(2.0 + 0.5 * 1.1 + 0.1 * 5.0)


def test_pid_step_measured_derivative() -> None:
    """A given derivative replaces the finite difference"""
    gains = PidGains(kp=0.0, ki=0.0, kd=2.0, output_limit=100.0)
    output, _ = pid_step(1.0, PidChannelState(prev_error=-100.0), gains, 0.01, derivative=-3.0)
    assert output == pytest.approx(-6.0)


def test_pid_step_clamps() -> None:
    """Integral and output saturate at their limits"""
    gains = PidGains(kp=100.0, ki=1.0, kd=0.0, integral_limit=0.5, output_limit=2.0)
    output, state = pid_step(10.0, PidChannelState(), gains, 1.0)
    assert state.integral == 0.5
    assert output == 2.0
    output, state = pid_step(-10.0, state, gains, 1.0)
    assert output == -2.0
    assert state.integral == -0.5


def test_pid_step_rejects_invalid_dt() -> None:
    with pytest.raises(ValueError, match=r"dt must be > 0"):
        pid_step(1.0, PidChannelState(), PidGains(), 0.0)


def test_gain_validation() -> None:
    """Negative gains, non-positive clamps and bad tilt limits are rejected"""
    with pytest.raises(ConfigurationError):
        PidGains(kp=-1.0)
    with pytest.raises(ConfigurationError):
        PidGains(output_limit=0.0)
    with pytest.raises(ConfigurationError) as excinfo:
        DualLoopGains(max_tilt=2.0)
    assert excinfo.value.key == "max_tilt"
    with pytest.raises(ValueError, match=r"six channels"):
        DualLoopState(channels=(PidChannelState(),))


# ==============================================================================


def test_allocation_matrix_rank(params: VehicleParams) -> None:
    """The allocation matrix is rank four"""
    assert np.linalg.matrix_rank(allocation_matrix(params)) == 4


def test_mix_at_trim_demand(params: VehicleParams) -> None:
    """Allocating the trim thrust without moments returns the trim command"""
    trim = solve_trim(params)
    command = mix(-params.m * params.g * cos(trim.theta_trim), np.zeros(3), params)
    np.testing.assert_allclose(command.as_array(), trim.command().as_array(), rtol=1e-9, atol=1e-9)


def test_mix_saturates(params: VehicleParams) -> None:
    """Excessive demands are clamped onto the actuator limits"""
    command = mix(-100.0 * params.m * params.g, np.array([5.0, 0.0, 0.0]), params)
    assert command.within_limits(params)
    assert command.omega1 == params.omega_max or command.omega2 == params.omega_max


def test_controller_at_trim_outputs_trim(params: VehicleParams) -> None:
    """Hovering at the target asks for the trim command"""
    trim = solve_trim(params)
    controller = DualLoopController(params)
    command = controller(trim.state(position=(1.0, 2.0, -3.0)), (1.0, 2.0, -3.0))
    np.testing.assert_allclose(command.as_array(), trim.command().as_array(), rtol=1e-9, atol=1e-9)


def test_pure_and_stateful_variants_agree(params: VehicleParams) -> None:
    """The functional form and the controller object compute the same update"""
    state = BodyState(position=(0.5, -0.2, 0.1), velocity=(0.1, 0.0, 0.0), attitude=(0.02, 0.05, 0.0))
    controller = DualLoopController(params)
    stateful = controller(state, np.zeros(3))
    pure, loop_state = dual_loop_control(state, np.zeros(3), DualLoopState(), params.dt, params)
    np.testing.assert_array_equal(stateful.as_array(), pure.as_array())
    assert loop_state == controller.state
    controller.reset()
    assert controller.state == DualLoopState()


def test_controller_saturates_on_large_error(params: VehicleParams) -> None:
    """Commands stay within limits for large position errors"""
    controller = DualLoopController(params)
    command = controller(solve_trim(params).state(), (500.0, -500.0, -500.0))
    assert command.within_limits(params)


@pytest.mark.parametrize(("axis", "step"), [(0, 1.0), (1, 1.0), (2, -1.0)])
def test_position_step_response(params: VehicleParams, axis: int, step: float) -> None:
    """A 1 m step settles within 0.1 m after 10 s without saturating rotors"""
    controller = DualLoopController(params)
    state = solve_trim(params).state()
    target = np.zeros(3)
    target[axis] = step

    steps = round(10.0 / params.dt)
    commands: list[ActuatorCommand] = []
    for _ in range(steps):
        command = controller(state, target)
        state = integrate_step(state, command, params)
        commands.append(command)

    assert abs(state.position[axis] - step) < 0.1
    omegas = np.array([command.as_array()[:3] for command in commands[steps // 2 :]])
    assert np.all(omegas > 0.0)
    assert np.all(omegas < params.omega_max)


# ==============================================================================


def test_climb_target_raises_collective(params: VehicleParams) -> None:
    """A target 1 m above the hover point asks for more than the trim thrust"""
    trim = solve_trim(params)
    controller = DualLoopController(params)
    hold, _ = controller.control(trim.state(), (0.0, 0.0, 0.0), DualLoopState(), params.dt)
    climb, _ = controller.control(trim.state(), (0.0, 0.0, -1.0), DualLoopState(), params.dt)

    assert climb.thrust_reference > hold.thrust_reference
    assert climb.force_demand[2] < hold.force_demand[2]
    assert np.all(climb.command.as_array()[:3] > hold.command.as_array()[:3])


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_pid_step_integral_stays_bounded(seed: int) -> None:
    """Under sustained saturation the integrator never leaves its limit"""
    rng = np.random.default_rng(seed)
    gains = PidGains(kp=5.0, ki=3.0, kd=0.5, integral_limit=0.25, output_limit=1.0)
    bias = rng.choice([-20.0, 20.0])
    state = PidChannelState()
    for error in bias + rng.normal(scale=10.0, size=2000):
        output, state = pid_step(float(error), state, gains, 0.01)
        assert abs(state.integral) <= gains.integral_limit
        assert abs(output) <= gains.output_limit


@pytest.mark.parametrize("seed", [4, 5])
def test_controller_integrals_stay_bounded(params: VehicleParams, seed: int) -> None:
    """Far away targets saturate every loop without winding up the integrators"""
    rng = np.random.default_rng(seed)
    controller = DualLoopController(params)
    body = solve_trim(params).state()
    loop_state = DualLoopState()
    limits = [channel.integral_limit for channel in controller.gains.channels]
    for target in rng.uniform(-300.0, 300.0, size=(500, 3)):
        output, loop_state = controller.control(body, target, loop_state, params.dt)
        assert output.command.within_limits(params)
        for channel, limit in zip(loop_state.channels, limits, strict=True):
            assert abs(channel.integral) <= limit
