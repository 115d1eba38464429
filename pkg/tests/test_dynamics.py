# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Unit tests for the rigid-body dynamics and the trim solver."""

from dataclasses import replace
from math import pi

import numpy as np
import pytest

from vtol_transition.dynamics import (
    GIMBAL_EPSILON,
    ActuatorCommand,
    BodyState,
    VehicleParams,
    body_to_earth,
    body_z_alignment,
    integrate_step,
    rotor_wrench,
    solve_trim,
    state_derivative,
    trim_residual,
    with_timestep,
)
from vtol_transition.exceptions import (
    ActuatorRangeError,
    ConfigurationError,
    DivergenceError,
    InfeasibleTrimError,
    SingularityError,
)


def random_params(rng: np.random.Generator) -> VehicleParams:
    """A random but valid parameter set."""
    m = rng.uniform(0.5, 3.0)
    g = 9.81
    omega_max = rng.uniform(1000.0, 4000.0)
    k_f = 4.0 * m * g / (3.0 * omega_max**2) * rng.uniform(1.0, 2.0)
    return VehicleParams(
        m=m,
        Jx=rng.uniform(0.005, 0.05),
        Jy=rng.uniform(0.005, 0.05),
        Jz=rng.uniform(0.005, 0.05),
        l1=rng.uniform(0.1, 0.5),
        l2=rng.uniform(0.05, 0.3),
        l3=rng.uniform(0.1, 0.5),
        K_F=k_f,
        K_M=k_f * rng.uniform(0.005, 0.05),
        g=g,
        omega_max=omega_max,
    )


# ==============================================================================


def test_default_params_are_valid(params: VehicleParams) -> None:
    """The default airframe has a thrust-to-weight ratio of 4"""
    assert params.max_total_thrust == pytest.approx(4.0 * params.m * params.g)


@pytest.mark.parametrize(
    ("field", "value"),
    [("m", 0.0), ("Jy", -1.0), ("dt", float("nan")), ("K_F", 1e-9)],
)
def test_invalid_params_raise(field: str, value: float) -> None:
    """Non-positive, non-finite or too weak parameters are rejected with the key"""
    with pytest.raises(ConfigurationError) as excinfo:
        VehicleParams(**{field: value})
    assert excinfo.value.key == field


def test_invalid_tilt_limits_raise() -> None:
    """The tilt limits must be ordered and within [0, pi/2]"""
    with pytest.raises(ConfigurationError, match=r"Tilt limits"):
        VehicleParams(mu_min=1.0, mu_max=0.5)


# ==============================================================================


def test_trim_is_exact_for_random_params() -> None:
    """The state derivative at the trim vanishes for 100 random airframes"""
    rng = np.random.default_rng(1)
    for _ in range(100):
        params = random_params(rng)
        residual = trim_residual(params)
        assert residual.shape == (12,)
        assert np.max(np.abs(residual)) < 1e-9


def test_trim_structure_holds_exactly() -> None:
    """Roll trim is zero and both wing rotors spin at the same speed"""
    rng = np.random.default_rng(2)
    for _ in range(100):
        trim = solve_trim(random_params(rng))
        assert trim.phi_trim == 0.0
        assert trim.omega3_trim == trim.omega2_trim
        assert trim.theta_trim > 0.0
        assert 0.0 < trim.mu_trim < pi / 2


def test_trim_infeasible_tilt(params: VehicleParams) -> None:
    """A trim tilt beyond the tilt limit raises"""
    with pytest.raises(InfeasibleTrimError):
        solve_trim(replace(params, mu_max=0.01))


def test_trim_state_and_command(params: VehicleParams) -> None:
    """The trim helpers build a motionless state and a symmetric command"""
    trim = solve_trim(params)
    state = trim.state(position=(1.0, 2.0, -3.0))
    np.testing.assert_array_equal(state.position, [1.0, 2.0, -3.0])
    np.testing.assert_array_equal(state.velocity, np.zeros(3))
    assert state.attitude[1] == trim.theta_trim

    command = trim.command()
    assert command.mu_a == command.mu_b == trim.mu_trim
    assert command.within_limits(params)


# ==============================================================================


def test_rotor_wrench_rejects_out_of_range(params: VehicleParams) -> None:
    """Commands are never clamped at the wrench layer"""
    command = ActuatorCommand(params.omega_max + 1.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ActuatorRangeError):
        rotor_wrench(command, params)


def test_rotor_wrench_symmetric_hover(params: VehicleParams) -> None:
    """Equal wing rotors at zero tilt produce no roll moment and no side force"""
    command = ActuatorCommand(1000.0, 800.0, 800.0, 0.0, 0.0)
    wrench = rotor_wrench(command, params)
    assert wrench.force[0] == 0.0
    assert wrench.force[1] == 0.0
    assert wrench.force[2] == pytest.approx(-params.K_F * (1000.0**2 + 2 * 800.0**2))
    assert wrench.moment[0] == pytest.approx(0.0)


def test_command_clamp_and_idle(params: VehicleParams) -> None:
    """Clamping maps onto the limits, NaN becomes zero"""
    command = ActuatorCommand(-5.0, float("nan"), 1e9, -1.0, 10.0).clamp(params)
    assert command.as_array().tolist() == [0.0, 0.0, params.omega_max, params.mu_min, params.mu_max]
    assert ActuatorCommand.idle(params).within_limits(params)


def test_body_to_earth_is_rotation() -> None:
    """The rotation matrix is orthonormal with determinant one"""
    rotation = body_to_earth((0.3, -0.2, 1.1))
    np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(rotation) == pytest.approx(1.0)


def test_body_z_alignment() -> None:
    """Level is 1, pitched by 90 degrees is 0, inverted is -1"""
    assert body_z_alignment((0.0, 0.0, 0.0)) == 1.0
    assert body_z_alignment((0.0, pi / 2, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert body_z_alignment((pi, 0.0, 0.0)) == pytest.approx(-1.0)


def test_free_fall(params: VehicleParams) -> None:
    """Without thrust a level vehicle accelerates downwards with g"""
    derivative = state_derivative(BodyState(), rotor_wrench(ActuatorCommand.idle(params), params), params)
    np.testing.assert_allclose(derivative.velocity_rate, [0.0, 0.0, params.g])
    np.testing.assert_array_equal(derivative.rates_rate, np.zeros(3))


def test_gimbal_guard(params: VehicleParams) -> None:
    """A pitch angle at the gimbal guard raises"""
    state = BodyState(attitude=(0.0, pi / 2 - GIMBAL_EPSILON / 2, 0.0))
    with pytest.raises(SingularityError):
        state_derivative(state, rotor_wrench(ActuatorCommand.idle(params), params), params)


def test_divergence_raises(params: VehicleParams) -> None:
    """A non-finite integration result raises"""
    state = BodyState(rates=(1e200, 1e200, 1e200))
    with pytest.raises(DivergenceError):
        integrate_step(state, ActuatorCommand.idle(params), params)


def test_trim_is_a_fixed_point(params: VehicleParams) -> None:
    """Integrating the trim keeps the vehicle in place"""
    trim = solve_trim(params)
    state = trim.state()
    for _ in range(100):
        state = integrate_step(state, trim.command(), params)
    assert np.max(np.abs(state.as_vector() - trim.state().as_vector())) < 1e-9


def test_state_vector_round_trip() -> None:
    """Packing into the 12-vector preserves every field"""
    state = BodyState(position=(1, 2, 3), velocity=(4, 5, 6), attitude=(0.1, 0.2, 0.3), rates=(7, 8, 9))
    assert BodyState.from_vector(state.as_vector()) == state
    with pytest.raises(ValueError, match=r"shape"):
        BodyState(position=(1.0, 2.0))


def test_integrator_order(params: VehicleParams) -> None:
    """The measured convergence order of the integrator is close to four"""
    trim = solve_trim(params)
    command = replace(trim.command(), omega1=trim.omega1_trim * 1.01, omega2=trim.omega2_trim * 1.005)
    start = BodyState(velocity=(1.0, 0.5, -0.2), attitude=(0.05, trim.theta_trim, 0.1), rates=(2.0, -1.5, 1.8))
    horizon = 0.4

    def simulate(dt: float) -> np.ndarray:
        stepped = with_timestep(params, dt)
        state = start
        for _ in range(round(horizon / dt)):
            state = integrate_step(state, command, stepped)
        return state.as_vector()

    reference = simulate(0.02 / 64)
    errors = [np.linalg.norm(simulate(dt) - reference) for dt in (0.02, 0.01, 0.005)]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all((orders >= 3.5) & (orders <= 4.5)), orders


# ==============================================================================


@pytest.mark.parametrize(
    ("command", "expected"),
    [
        pytest.param(
            (1000.0, 0.0, 0.0, 0.0, 0.0),
            lambda p, s: ((0.0, 0.0, -p.K_F * s), (0.0, p.l1 * p.K_F * s, -p.K_M * s)),
            id="main-rotor-alone",
        ),
        pytest.param(
            (0.0, 1000.0, 1000.0, pi / 2, pi / 2),
            lambda p, s: ((2 * p.K_F * s, 0.0, 0.0), (0.0, 0.0, 2 * p.l3 * p.K_F * s)),
            id="cruise-tilt",
        ),
        pytest.param(
            (0.0, 1000.0, 0.0, 0.0, 0.0),
            lambda p, s: ((0.0, 0.0, -p.K_F * s), (-p.l3 * p.K_F * s, -p.l2 * p.K_F * s, p.K_M * s)),
            id="left-wing-rotor-alone",
        ),
        pytest.param(
            (0.0, 1000.0, 1000.0, 0.3, 0.7),
            lambda p, s: (
                (p.K_F * s * (np.sin(0.3) + np.sin(0.7)), 0.0, -p.K_F * s * (np.cos(0.3) + np.cos(0.7))),
                (
                    -p.l3 * p.K_F * s * (np.cos(0.3) - np.cos(0.7)),
                    -p.l2 * p.K_F * s * (np.cos(0.3) + np.cos(0.7)),
                    p.l3 * p.K_F * s * (np.sin(0.3) + np.sin(0.7)) + p.K_M * s * (np.cos(0.3) - np.cos(0.7)),
                ),
            ),
            id="asymmetric-tilt",
        ),
    ],
)
def test_rotor_wrench_cases(params: VehicleParams, command: tuple[float, ...], expected: object) -> None:
    """The wrench of single rotors and tilt combinations matches the closed form"""
    wrench = rotor_wrench(ActuatorCommand(*command), params)
    force, moment = expected(params, 1000.0**2)
    scale = params.K_F * 1000.0**2
    np.testing.assert_allclose(wrench.force, force, rtol=1e-12, atol=1e-12 * scale)
    np.testing.assert_allclose(wrench.moment, moment, rtol=1e-12, atol=1e-12 * scale)


def test_asymmetric_tilt_rolls_the_vehicle(params: VehicleParams) -> None:
    """The wing rotor with the smaller tilt lifts its side more"""
    left_upright = rotor_wrench(ActuatorCommand(0.0, 1000.0, 1000.0, 0.1, 0.6), params)
    right_upright = rotor_wrench(ActuatorCommand(0.0, 1000.0, 1000.0, 0.6, 0.1), params)
    assert left_upright.moment[0] < 0.0
    assert right_upright.moment[0] == pytest.approx(-left_upright.moment[0])
    assert left_upright.force[0] == pytest.approx(right_upright.force[0])


@pytest.mark.parametrize(
    "start",
    [
        BodyState(),
        BodyState(velocity=(3.0, -1.0, 0.5), attitude=(0.2, -0.4, 2.0), rates=(1.5, -0.7, 0.3)),
    ],
)
def test_integrate_step_is_deterministic(params: VehicleParams, start: BodyState) -> None:
    """Two identical calls give bit-identical states"""
    command = ActuatorCommand(1200.0, 900.0, 950.0, 0.2, 0.35)
    first = integrate_step(start, command, params)
    second = integrate_step(start, command, params)
    assert first.as_vector().tobytes() == second.as_vector().tobytes()


@pytest.mark.parametrize(
    "attitude",
    [
        (0.0, 0.0, 0.0),
        (pi, 0.0, 0.0),
        (0.0, pi, 0.0),
        (pi, pi, 0.0),
        (-pi / 2, pi / 2, 1.0),
        (7.0, -12.5, 3.0),
        (1e6, -1e6, 0.0),
    ],
)
def test_body_z_alignment_is_bounded(attitude: tuple[float, float, float]) -> None:
    """The alignment stays inside [-1, 1] for any attitude"""
    assert -1.0 <= body_z_alignment(attitude) <= 1.0


def test_body_z_alignment_is_bounded_for_random_attitudes() -> None:
    rng = np.random.default_rng(21)
    for attitude in rng.uniform(-10.0, 10.0, size=(1000, 3)):
        assert -1.0 <= body_z_alignment(attitude) <= 1.0
