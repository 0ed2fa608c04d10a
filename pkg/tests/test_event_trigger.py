import math

import numpy as np
import pytest

from utils.event_trigger import (
    Branch,
    EtcParams,
    StrategyKind,
    SwitchPairing,
    TriggerState,
    active_branch,
    candidate_control,
    hold_update,
    shaped_control_fixed,
    shaped_control_relative,
    trigger_condition,
)
from utils.vehicle_dynamics import vec2

P = EtcParams()
ZERO = vec2(0, 0)


# ---------------------------------------------------------------------------
# Shaped controls
# ---------------------------------------------------------------------------

def test_fixed_shaping_identity_at_zero_error():
    mu = vec2(1.7, -0.4)
    np.testing.assert_array_equal(shaped_control_fixed(mu, ZERO, P), mu)


def test_fixed_shaping_saturates():
    w = shaped_control_fixed(vec2(1.0, 1.0), vec2(1e6, -1e6), P)
    np.testing.assert_allclose(w, [1.0 - 2.5, 1.0 + 2.5], rtol=1e-12)


def test_fixed_shaping_hand_value():
    w = shaped_control_fixed(vec2(1.0, 0.0), vec2(0.5, 0.0), P)
    assert w[0] == pytest.approx(1 - 2.5 * math.tanh(2.5), rel=1e-12)
    assert w[0] == pytest.approx(-1.466536, abs=1e-6)
    assert w[1] == 0.0


def test_relative_shaping_zero():
    np.testing.assert_array_equal(np.abs(shaped_control_relative(ZERO, ZERO, P)), ZERO)


def test_relative_shaping_saturates():
    w = shaped_control_relative(vec2(3.0, 0.0), vec2(1e6, 0.0), P)
    assert w[0] == pytest.approx(-1.9 * (3.0 + 2.0), rel=1e-12)


def test_relative_shaping_hand_value():
    mu, z2 = -10.2, 0.5
    expected = -1.9 * (mu * math.tanh(mu * z2 / 0.5) + 2 * math.tanh(2 * z2 / 0.5))
    w = shaped_control_relative(vec2(mu, 0.0), vec2(z2, 0.0), P)
    assert w[0] == pytest.approx(expected, rel=1e-12)
    # μ·tanh(μ·z) >= 0, so the first term always pulls w against sgn(z2)
    assert w[0] < 0


# ---------------------------------------------------------------------------
# Trigger conditions
# ---------------------------------------------------------------------------

def test_fixed_rule():
    assert not trigger_condition(StrategyKind.FIXED, vec2(1.9, 0), ZERO, P)
    assert trigger_condition(StrategyKind.FIXED, vec2(1.5, 1.5), ZERO, P)


def test_relative_rule_at_zero_control():
    assert not trigger_condition(StrategyKind.RELATIVE, vec2(0.09, 0), ZERO, P)
    assert trigger_condition(StrategyKind.RELATIVE, vec2(0.11, 0), ZERO, P)


def test_relative_rule_scales_with_held_control():
    u = vec2(3.0, 4.0)      # ‖u‖ = 5, threshold 0.9·5 + 0.1 = 4.6
    assert not trigger_condition(StrategyKind.RELATIVE, vec2(4.5, 0), u, P)
    assert trigger_condition(StrategyKind.RELATIVE, vec2(4.7, 0), u, P)


def test_continuous_always_triggers():
    assert trigger_condition(StrategyKind.CONTINUOUS, ZERO, ZERO, P)


@pytest.mark.parametrize("u_norm, expected", [(0.54, Branch.RELATIVE), (0.56, Branch.FIXED)])
def test_switched_branch_selection(u_norm, expected):
    assert active_branch(StrategyKind.SWITCHED, vec2(u_norm, 0), P) is expected


def test_switched_uses_active_rule():
    e = vec2(0.2, 0)
    # relative rule below S: threshold 0.9·0.54 + 0.1 = 0.586
    assert not trigger_condition(StrategyKind.SWITCHED, e, vec2(0.54, 0), P)
    assert trigger_condition(StrategyKind.SWITCHED, vec2(0.6, 0), vec2(0.54, 0), P)
    # fixed rule at or above S
    assert not trigger_condition(StrategyKind.SWITCHED, vec2(1.9, 0), vec2(0.56, 0), P)
    assert trigger_condition(StrategyKind.SWITCHED, vec2(2.0, 0), vec2(0.56, 0), P)


def test_algorithm_pairing_flips_branches():
    p = EtcParams(switch_pairing=SwitchPairing.ALGORITHM)
    assert active_branch(StrategyKind.SWITCHED, vec2(0.54, 0), p) is Branch.FIXED
    assert active_branch(StrategyKind.SWITCHED, vec2(0.56, 0), p) is Branch.RELATIVE


def test_fixed_branch_for_single_strategies():
    assert active_branch(StrategyKind.CONTINUOUS, ZERO, P) is Branch.NONE
    assert active_branch(StrategyKind.FIXED, ZERO, P) is Branch.FIXED
    assert active_branch(StrategyKind.RELATIVE, ZERO, P) is Branch.RELATIVE


def test_candidate_control_per_strategy():
    mu, z2 = vec2(1.0, -0.5), vec2(0.3, 0.1)
    w, branch = candidate_control(StrategyKind.CONTINUOUS, mu, z2, ZERO, P)
    np.testing.assert_array_equal(w, mu)
    assert branch is Branch.NONE
    w, _ = candidate_control(StrategyKind.FIXED, mu, z2, ZERO, P)
    np.testing.assert_array_equal(w, shaped_control_fixed(mu, z2, P))
    w, branch = candidate_control(StrategyKind.SWITCHED, mu, z2, vec2(1.0, 0), P)
    assert branch is Branch.FIXED
    np.testing.assert_array_equal(w, shaped_control_fixed(mu, z2, P))


def test_switched_candidate_is_per_vehicle():
    mu = np.array([[1.0, 0.0], [2.0, -1.0]])
    z2 = np.array([[0.3, 0.1], [-0.2, 0.4]])
    u = np.array([[0.1, 0.0], [3.0, 0.0]])
    w, branch = candidate_control(StrategyKind.SWITCHED, mu, z2, u, P)
    np.testing.assert_array_equal(branch, [Branch.RELATIVE, Branch.FIXED])
    np.testing.assert_allclose(w[0], shaped_control_relative(mu[0], z2[0], P), rtol=1e-12)
    np.testing.assert_allclose(w[1], shaped_control_fixed(mu[1], z2[1], P), rtol=1e-12)


def test_formation_trigger_condition_is_vectorised():
    e = np.array([[1.9, 0.0], [2.1, 0.0], [0.0, 2.0]])
    fired = trigger_condition(StrategyKind.FIXED, e, np.zeros((3, 2)), P)
    np.testing.assert_array_equal(fired, [False, True, True])


def test_larger_fixed_threshold_never_adds_events():
    """Replay one w sequence through the fixed rule at two thresholds."""
    rng = np.random.default_rng(5)
    w_seq = np.cumsum(rng.normal(scale=0.2, size=(2000, 2)), axis=0)

    def count(threshold):
        p = EtcParams(fixed_threshold=threshold, fixed_shaping=threshold + 0.5)
        ts = TriggerState()
        for k, w in enumerate(w_seq):
            fired = k == 0 or trigger_condition(StrategyKind.FIXED, w - ts.held_control, ts.held_control, p)
            hold_update(ts, w, fired, k * 0.001)
        return ts.event_count

    assert count(3.0) <= count(2.0)


# ---------------------------------------------------------------------------
# Parameters and hold
# ---------------------------------------------------------------------------

def test_params_reject_slope_out_of_range():
    with pytest.raises(ValueError, match="0<ζ<1"):
        EtcParams(relative_slope=1.2)


def test_params_reject_small_relative_shaping():
    with pytest.raises(ValueError, match=r"ξ̄ > ξ/\(1−ζ\) = 1"):
        EtcParams(relative_shaping=0.5)


def test_params_reject_shaping_below_threshold():
    with pytest.raises(ValueError):
        EtcParams(fixed_threshold=2.0, fixed_shaping=1.5)


def test_hold_without_trigger_keeps_control():
    ts = TriggerState(held_control=vec2(1, 1))
    hold_update(ts, vec2(3, 0), False, 0.5)
    np.testing.assert_array_equal(ts.held_control, [1.0, 1.0])
    assert ts.event_count == 0


def test_hold_on_trigger_updates_and_records():
    ts = TriggerState()
    hold_update(ts, vec2(3, 0), True, 0.5, Branch.FIXED)
    np.testing.assert_array_equal(ts.held_control, [3.0, 0.0])
    assert ts.event_count == 1
    assert ts.event_times == [0.5]
    assert ts.event_branches == [int(Branch.FIXED)]
    # post-update measurement error is zero
    np.testing.assert_array_equal(vec2(3, 0) - ts.held_control, ZERO)


def test_hold_event_times_strictly_increase():
    ts = TriggerState()
    for t, fired in [(0.0, True), (0.001, False), (0.002, True), (0.003, True)]:
        hold_update(ts, vec2(t, 0), fired, t)
    assert ts.event_times == [0.0, 0.002, 0.003]
    assert len(ts.event_times) == ts.event_count
    with pytest.raises(ValueError):
        hold_update(ts, vec2(0, 0), True, 0.003)
