import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from utils.adaptive_law import (
    AdaptiveState,
    ControllerGains,
    RbfConfig,
    adapt_step,
    continuous_control,
    nn_output,
    rbf_basis,
    tracking_energy,
    tracking_errors,
)
from utils.reference_scenario import ReferenceSignal
from utils.vehicle_dynamics import vec2

RBF = RbfConfig()
GAINS = ControllerGains()
C1 = np.diag([5.0, 5.0])
ZERO = vec2(0, 0)


def _ref(position, velocity=ZERO, acceleration=ZERO):
    return ReferenceSignal(np.asarray(position, float), np.asarray(velocity, float), np.asarray(acceleration, float))


# ---------------------------------------------------------------------------
# RBF network
# ---------------------------------------------------------------------------

def test_basis_peaks_at_center():
    basis = rbf_basis(vec2(8.0, 0.0), RBF)
    assert basis[2] == 1.0
    assert np.all((basis > 0) & (basis <= 1))


def test_basis_one_width_from_center():
    basis = rbf_basis(vec2(12.0, 4.0), RBF)
    assert basis[3] == pytest.approx(math.exp(-1), rel=1e-12)
    assert basis[3] == pytest.approx(0.36788, abs=1e-5)


def test_basis_vanishes_far_away():
    basis = rbf_basis(vec2(500.0, 500.0), RBF)
    assert np.all(basis < 1e-300)
    assert np.all(basis >= 0)


def test_basis_translation_invariance():
    shift = vec2(3.0, -7.0)
    moved = RbfConfig(centers=RBF.centers + shift, width=RBF.width)
    gamma = vec2(6.3, 0.4)
    np.testing.assert_allclose(rbf_basis(gamma + shift, moved), rbf_basis(gamma, RBF), rtol=1e-12)


def test_basis_broadcasts_over_vehicles():
    gammas = np.array([[1.0, 0.0], [9.0, 1.0], [15.0, -0.5]])
    stacked = rbf_basis(gammas, RBF)
    assert stacked.shape == (3, 5)
    for i, g in enumerate(gammas):
        np.testing.assert_array_equal(stacked[i], rbf_basis(g, RBF))


def test_rbf_config_validation():
    with pytest.raises(ValueError):
        RbfConfig(width=0.0)
    with pytest.raises(ValueError):
        RbfConfig(centers=np.array([[0.0, 0.0], [0.0, 0.0]]))


def test_nn_output_zero_weights():
    state = AdaptiveState.initial(5, ZERO)
    np.testing.assert_array_equal(nn_output(state, rbf_basis(vec2(10, 0), RBF)), ZERO)


def test_nn_output_block_structure():
    state = AdaptiveState.initial(5, ZERO)
    state.W_hat[0, 3] = 1.0
    basis = rbf_basis(vec2(11.0, 0.5), RBF)
    out = nn_output(state, basis)
    assert out[0] == basis[3]
    assert out[1] == 0.0


def test_nn_output_matches_dense_block_matrix():
    rng = np.random.default_rng(3)
    l = 5
    state = AdaptiveState(W_hat=rng.normal(size=(2, l)), sigma_hat=ZERO)
    basis = rng.uniform(size=l)
    # Ŵ as a 2l×2 block-diagonal matrix, Λ stacked twice
    dense = np.zeros((2 * l, 2))
    dense[:l, 0] = state.W_hat[0]
    dense[l:, 1] = state.W_hat[1]
    expected = dense.T @ np.concatenate([basis, basis])
    np.testing.assert_allclose(nn_output(state, basis), expected, rtol=1e-12)


def test_nn_output_is_linear_in_weights():
    rng = np.random.default_rng(11)
    basis = rbf_basis(vec2(9.5, 0.3), RBF)
    W1, W2 = rng.normal(size=(2, 2, 5))
    a, b = 0.7, -2.3
    out = nn_output(AdaptiveState(W_hat=a * W1 + b * W2, sigma_hat=ZERO), basis)
    expected = (
        a * nn_output(AdaptiveState(W_hat=W1, sigma_hat=ZERO), basis)
        + b * nn_output(AdaptiveState(W_hat=W2, sigma_hat=ZERO), basis)
    )
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-15)


def test_nn_output_rejects_wrong_basis_length():
    with pytest.raises(ValueError):
        nn_output(AdaptiveState.initial(5, ZERO), np.ones(4))


# ---------------------------------------------------------------------------
# Backstepping
# ---------------------------------------------------------------------------

def test_perfect_tracking_gives_zero_errors():
    ref = _ref(vec2(50, 2), vec2(10, 0))
    errs = tracking_errors(vec2(50, 2), vec2(10, 0), ref, C1, vec2(50, 2), GAINS.K1)
    for value in errs:
        np.testing.assert_array_equal(value, ZERO)


def test_virtual_controller_hand_value():
    ref = _ref(vec2(0, 0))
    errs = tracking_errors(vec2(2, -1), ZERO, ref, C1, vec2(2, -1), GAINS.K1)
    np.testing.assert_allclose(errs.alpha, [-1.0, 0.5])
    np.testing.assert_allclose(errs.z2, [1.0, -0.5])


def test_alpha_dot_matches_finite_difference():
    """Propagate x̂ with the observer's position rate and difference α."""
    dt = 0.001
    x_hat, v_hat, x_bar = vec2(1.0, 0.5), vec2(9.0, 0.1), vec2(1.3, 0.4)
    ref_v = vec2(10.0, 0.0)
    t = 2.0
    errs = tracking_errors(x_hat, v_hat, _ref(vec2(10 * t, 0), ref_v), C1, x_bar, GAINS.K1)
    x_hat_next = x_hat + (v_hat + (x_bar - x_hat) @ C1.T) * dt
    errs_next = tracking_errors(x_hat_next, v_hat, _ref(vec2(10 * (t + dt), 0), ref_v), C1, x_bar, GAINS.K1)
    fd = (errs_next.alpha - errs.alpha) / dt
    np.testing.assert_allclose(fd, errs.alpha_dot, atol=10 * dt)


def test_control_zero_inputs():
    state = AdaptiveState.initial(5, ZERO)
    mu = continuous_control(ZERO, ZERO, state, rbf_basis(ZERO, RBF), ZERO, ZERO, GAINS)
    np.testing.assert_array_equal(mu, ZERO)


def test_control_hand_value():
    state = AdaptiveState(W_hat=np.zeros((2, 5)), sigma_hat=vec2(0.2, 0.2))
    mu = continuous_control(ZERO, vec2(0.5, 0), state, rbf_basis(ZERO, RBF), ZERO, ZERO, GAINS)
    np.testing.assert_allclose(mu, [-10.2, 0.0], rtol=1e-12)


def test_control_odd_in_z2():
    state = AdaptiveState(W_hat=np.zeros((2, 5)), sigma_hat=vec2(0.2, 0.3))
    basis = rbf_basis(ZERO, RBF)
    plus = continuous_control(ZERO, vec2(0.5, -0.25), state, basis, ZERO, ZERO, GAINS)
    minus = continuous_control(ZERO, vec2(-0.5, 0.25), state, basis, ZERO, ZERO, GAINS)
    np.testing.assert_allclose(plus, -minus, rtol=1e-12)


def test_longitudinal_control_ignores_lateral_channel():
    rng = np.random.default_rng(5)
    basis = rbf_basis(vec2(10.2, 0.1), RBF)
    state = AdaptiveState(W_hat=rng.normal(size=(2, 5)), sigma_hat=vec2(0.2, 0.3))
    z1, z2 = vec2(0.4, -0.1), vec2(-0.3, 0.2)
    alpha_dot, accel = vec2(0.05, -0.02), vec2(-1.0, 0.0)
    base = continuous_control(z1, z2, state, basis, alpha_dot, accel, GAINS)

    perturbed = AdaptiveState(W_hat=state.W_hat.copy(), sigma_hat=vec2(0.2, 4.0))
    perturbed.W_hat[1] = rng.normal(size=5) * 10
    out = continuous_control(vec2(0.4, 3.0), vec2(-0.3, -7.5), perturbed, basis, alpha_dot, accel, GAINS)
    assert out[0] == base[0]
    assert out[1] != base[1]


# ---------------------------------------------------------------------------
# Adaptation
# ---------------------------------------------------------------------------

def test_adaptation_equilibrium():
    state = AdaptiveState.initial(5, vec2(0.1, 0.2))
    gains = ControllerGains(sigma_prior=vec2(0.1, 0.2))
    out = adapt_step(state, rbf_basis(vec2(5, 0), RBF), ZERO, gains, 0.001)
    np.testing.assert_array_equal(out.W_hat, state.W_hat)
    np.testing.assert_array_equal(out.sigma_hat, state.sigma_hat)


def test_weights_leak_toward_zero():
    state = AdaptiveState(W_hat=np.full((2, 5), 2.0), sigma_hat=ZERO)
    out = adapt_step(state, rbf_basis(vec2(5, 0), RBF), ZERO, GAINS, 0.01)
    assert np.all(np.abs(out.W_hat) < np.abs(state.W_hat))
    np.testing.assert_allclose(out.W_hat, 2.0 * (1 - 0.01 * 0.01), rtol=1e-12)


def test_weight_update_hand_value():
    state = AdaptiveState.initial(5, ZERO)
    basis = rbf_basis(vec2(4, 0), RBF)
    out = adapt_step(state, basis, vec2(0.5, -1.0), GAINS, 0.001)
    np.testing.assert_allclose(out.W_hat[0], basis * 0.5 * 0.001, rtol=1e-12)
    np.testing.assert_allclose(out.W_hat[1], basis * -1.0 * 0.001, rtol=1e-12)


def test_sigma_converges_to_fixed_point():
    z2 = vec2(1.0, 0.0)
    state = AdaptiveState.initial(5, ZERO)
    basis = rbf_basis(ZERO, RBF)
    dt = 0.01
    for _ in range(10000):
        state = adapt_step(state, basis, z2, GAINS, dt)
    np.testing.assert_allclose(state.sigma_hat, [0.5, 0.0], atol=1e-6)

    # ODE oracle for the same law: σ' = 0.2(|z2| − 2σ)
    sol = solve_ivp(lambda t, s: 0.2 * (np.abs(z2) - 2 * s), (0, 100), [0.0, 0.0], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(state.sigma_hat, sol.y[:, -1], atol=1e-4)


def test_stacked_adaptation_matches_single_vehicle():
    rng = np.random.default_rng(11)
    n = 4
    stacked = AdaptiveState(W_hat=rng.normal(size=(n, 2, 5)), sigma_hat=rng.uniform(size=(n, 2)))
    basis = rbf_basis(rng.uniform(0, 16, size=(n, 2)), RBF)
    z2 = rng.normal(size=(n, 2))
    out = adapt_step(stacked, basis, z2, GAINS, 0.001)
    for i in range(n):
        single = adapt_step(
            AdaptiveState(stacked.W_hat[i], stacked.sigma_hat[i]), basis[i], z2[i], GAINS, 0.001
        )
        np.testing.assert_allclose(out.W_hat[i], single.W_hat, rtol=1e-12)
        np.testing.assert_allclose(out.sigma_hat[i], single.sigma_hat, rtol=1e-12)


def test_gain_validation():
    with pytest.raises(ValueError):
        ControllerGains(K1=np.diag([0.5, -0.5]))
    with pytest.raises(ValueError):
        ControllerGains(Xi1=0.0)


def test_tracking_energy():
    assert tracking_energy(vec2(3, 4), vec2(0, 1)) == pytest.approx(13.0)
    np.testing.assert_allclose(
        tracking_energy(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros((2, 2))), [0.5, 2.0]
    )
