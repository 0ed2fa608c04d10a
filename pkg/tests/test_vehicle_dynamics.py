import math

import numpy as np
import pytest

from utils.vehicle_dynamics import (
    VehicleParams,
    VehicleState,
    disturbance_accel,
    drag_accel,
    plant_step,
    stack_params,
    vec2,
)

AV1 = VehicleParams(mass=1760)
NO_DISTURBANCE = dict(air_density=0.0, disturbance_amp=0.0)


def test_drag_zero_at_rest():
    np.testing.assert_array_equal(drag_accel(vec2(0, 0), AV1), np.zeros(2))


def test_drag_magnitude_at_cruise_speed():
    expected = 0.5 * 1.206 * 5.58 * 0.3 * 100 / 1760
    out = drag_accel(vec2(10, 0), AV1)
    assert out[0] == pytest.approx(-expected, rel=1e-12)
    assert out[0] == pytest.approx(-0.05735, abs=1e-5)
    assert out[1] == 0.0


def test_drag_is_quadratic_and_odd():
    a = drag_accel(vec2(3.0, -2.0), AV1)
    b = drag_accel(vec2(6.0, -4.0), AV1)
    np.testing.assert_allclose(b, 4 * a, rtol=1e-12)
    np.testing.assert_allclose(drag_accel(vec2(-3.0, 2.0), AV1), -a, rtol=1e-12)


def test_drag_scales_inversely_with_mass():
    heavy = VehicleParams(mass=3520)
    np.testing.assert_allclose(drag_accel(vec2(10, 5), heavy), drag_accel(vec2(10, 5), AV1) / 2, rtol=1e-12)


@pytest.mark.parametrize("t", [0.0, 2.5])
def test_disturbance_vanishes_at_sine_zeros(t):
    np.testing.assert_allclose(disturbance_accel(t, AV1), np.zeros(2), atol=1e-15)


def test_disturbance_quarter_period():
    expected = 0.3 * math.exp(-0.05)
    out = disturbance_accel(0.25, AV1)
    np.testing.assert_allclose(out, [expected, expected], rtol=1e-12)
    assert out[0] == pytest.approx(0.28537, abs=1e-5)


def test_disturbance_bounded_by_envelope():
    for t in np.linspace(0, 50, 2001):
        assert abs(disturbance_accel(t, AV1)[0]) <= 0.3 * math.exp(-t / 5) + 1e-15


def test_disturbance_rejects_negative_time():
    with pytest.raises(ValueError):
        disturbance_accel(-0.1, AV1)


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(mass=0)
    with pytest.raises(ValueError):
        VehicleParams(mass=1000, drag_coeff=-0.1)


def test_plant_step_equilibrium():
    state = VehicleState(vec2(5, 1), vec2(0, 0))
    out = plant_step(state, vec2(0, 0), 0.0, 0.001, AV1)
    np.testing.assert_array_equal(out.position, state.position)
    np.testing.assert_array_equal(out.velocity, state.velocity)


def test_plant_step_uniform_motion():
    params = VehicleParams(mass=1760, **NO_DISTURBANCE)
    out = plant_step(VehicleState(vec2(0, 0), vec2(10, 0)), vec2(0, 0), 0.3, 0.001, params)
    np.testing.assert_allclose(out.position, [0.01, 0.0], rtol=1e-12)
    np.testing.assert_array_equal(out.velocity, [10.0, 0.0])


def test_plant_step_hand_euler():
    out = plant_step(VehicleState(vec2(0, 0), vec2(0, 0)), vec2(1, 0), 0.0, 0.001, AV1)
    np.testing.assert_array_equal(out.velocity, [0.001, 0.0])


def test_plant_constant_velocity_is_linear_in_time():
    params = VehicleParams(mass=1760, **NO_DISTURBANCE)
    state = VehicleState(vec2(0, 0), vec2(4, 1))
    for k in range(1000):
        state = plant_step(state, vec2(0, 0), k * 0.001, 0.001, params)
    np.testing.assert_array_equal(state.velocity, [4.0, 1.0])
    np.testing.assert_allclose(state.position, [4.0, 1.0], rtol=1e-10)


def test_plant_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        plant_step(VehicleState(vec2(0, 0), vec2(0, 0)), vec2(0, 0), 0.0, 0.0, AV1)


def test_stacked_params_match_individual_steps():
    params = [VehicleParams(mass=m) for m in (1760, 1920, 1660)]
    positions = np.array([[0.0, 1.0], [5.0, 2.0], [9.0, -1.0]])
    velocities = np.array([[10.0, 0.5], [12.0, -0.2], [8.0, 0.0]])
    u = np.array([[0.5, 0.1], [-0.3, 0.0], [1.0, -1.0]])
    stacked = plant_step(VehicleState(positions, velocities), u, 1.3, 0.001, stack_params(params))
    for i, p in enumerate(params):
        single = plant_step(VehicleState(positions[i], velocities[i]), u[i], 1.3, 0.001, p)
        np.testing.assert_allclose(stacked.position[i], single.position, rtol=1e-15)
        np.testing.assert_allclose(stacked.velocity[i], single.velocity, rtol=1e-15)


def test_state_finiteness():
    assert VehicleState(vec2(1, 2), vec2(3, 4)).is_finite()
    assert not VehicleState(vec2(np.nan, 2), vec2(3, 4)).is_finite()
