"""
Event-Triggered Control

The actuator holds u between events. At every step a shaped candidate w is
formed from μ; an event fires when the measurement error e = w − u crosses
the strategy's threshold, and then u := w.

Strategies:
    CONTINUOUS  u = μ every step (no triggering)
    FIXED       w = μ − ς̄·tanh(ς̄·z2/ε)                       event: ‖e‖ ≥ ς
    RELATIVE    w = −(1+ζ)(μ·tanh(μ·z2/ε) + ξ̄·tanh(ξ̄·z2/ε))     event: ‖e‖ ≥ ζ‖u‖ + ξ
    SWITCHED    relative rule while ‖u‖ < S, fixed rule once ‖u‖ ≥ S

All norms are Euclidean over the (longitudinal, lateral) pair.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Tuple, Union

import numpy as np

from utils.vehicle_dynamics import Vec2

BoolLike = Union[bool, np.ndarray]


class StrategyKind(Enum):
    """Control update strategies"""
    CONTINUOUS = "continuous"
    FIXED = "fixed"
    RELATIVE = "relative"
    SWITCHED = "switched"


class Branch(IntEnum):
    """Threshold rule in force at a step (logged as strategy_branch)."""
    NONE = 0
    FIXED = 1
    RELATIVE = 2


class SwitchPairing(Enum):
    """
    Which rule the switched strategy uses below the boundary S.

    THRESHOLD: relative below S, fixed at or above S.
    ALGORITHM: the reverse pairing, kept for sensitivity studies.
    """
    THRESHOLD = "threshold"
    ALGORITHM = "algorithm"


# =============================================================================
# PARAMETERS AND STATE
# =============================================================================

@dataclass(frozen=True)
class EtcParams:
    """
    fixed_threshold ς, fixed_shaping ς̄ (> ς), smoothing (ε1, ε2),
    relative_slope ζ ∈ (0, 1), relative_floor ξ,
    relative_shaping ξ̄ > ξ/(1 − ζ), switch_boundary S.
    """
    fixed_threshold: float = 2.0
    fixed_shaping: float = 2.5
    smoothing: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    relative_slope: float = 0.9
    relative_floor: float = 0.1
    relative_shaping: float = 2.0
    switch_boundary: float = 0.55
    switch_pairing: SwitchPairing = SwitchPairing.THRESHOLD

    def __post_init__(self):
        smoothing = np.asarray(self.smoothing, dtype=float)
        object.__setattr__(self, 'smoothing', smoothing)
        if not self.fixed_shaping > self.fixed_threshold > 0:
            raise ValueError(
                f"need ς̄ > ς > 0, got ς={self.fixed_threshold}, ς̄={self.fixed_shaping}"
            )
        if not 0 < self.relative_slope < 1:
            raise ValueError(f"need 0<ζ<1, got ζ={self.relative_slope}")
        if self.relative_floor <= 0:
            raise ValueError(f"need ξ > 0, got ξ={self.relative_floor}")
        bound = self.relative_floor / (1 - self.relative_slope)
        if not self.relative_shaping > bound:
            raise ValueError(
                f"need ξ̄ > ξ/(1−ζ) = {bound:g}, got ξ̄={self.relative_shaping}"
            )
        if smoothing.shape != (2,) or np.any(smoothing <= 0):
            raise ValueError(f"need ε1, ε2 > 0, got {smoothing.tolist()}")
        if self.switch_boundary <= 0:
            raise ValueError(f"need S > 0, got S={self.switch_boundary}")


@dataclass
class TriggerState:
    """Held control plus the event history of one vehicle."""
    held_control: Vec2 = field(default_factory=lambda: np.zeros(2))
    last_event_time: Optional[float] = None
    event_count: int = 0
    event_times: List[float] = field(default_factory=list)
    event_branches: List[int] = field(default_factory=list)


# =============================================================================
# SHAPED CANDIDATE CONTROLS
# =============================================================================

def shaped_control_fixed(mu: Vec2, z2: Vec2, p: EtcParams) -> Vec2:
    """w = μ − ς̄·tanh(ς̄·z2/ε), per axis."""
    return mu - p.fixed_shaping * np.tanh(p.fixed_shaping * z2 / p.smoothing)


def shaped_control_relative(mu: Vec2, z2: Vec2, p: EtcParams) -> Vec2:
    """w = −(1+ζ)·(μ·tanh(μ·z2/ε) + ξ̄·tanh(ξ̄·z2/ε)), per axis."""
    xi_bar = p.relative_shaping
    return -(1 + p.relative_slope) * (
        mu * np.tanh(mu * z2 / p.smoothing)
        + xi_bar * np.tanh(xi_bar * z2 / p.smoothing)
    )


# =============================================================================
# TRIGGERING
# =============================================================================

def _norm(v: Vec2) -> np.ndarray:
    return np.sqrt(np.sum(np.square(v), axis=-1))


def _fixed_rule(e: Vec2, p: EtcParams) -> BoolLike:
    return _norm(e) >= p.fixed_threshold


def _relative_rule(e: Vec2, u_held: Vec2, p: EtcParams) -> BoolLike:
    return _norm(e) >= p.relative_slope * _norm(u_held) + p.relative_floor


def active_branch(strategy: StrategyKind, u_held: Vec2, p: EtcParams) -> Union[Branch, np.ndarray]:
    """
    Threshold rule in force given the held control. Returns a Branch for one
    vehicle, an int array of Branch values for a stacked formation.
    """
    u_held = np.asarray(u_held, dtype=float)
    lead = u_held.shape[:-1]
    if strategy is StrategyKind.CONTINUOUS:
        branch = np.full(lead, int(Branch.NONE))
    elif strategy is StrategyKind.FIXED:
        branch = np.full(lead, int(Branch.FIXED))
    elif strategy is StrategyKind.RELATIVE:
        branch = np.full(lead, int(Branch.RELATIVE))
    else:
        below = _norm(u_held) < p.switch_boundary
        if p.switch_pairing is SwitchPairing.ALGORITHM:
            below = ~below
        branch = np.where(below, int(Branch.RELATIVE), int(Branch.FIXED))
    return Branch(int(branch)) if branch.ndim == 0 else branch


def candidate_control(
    strategy: StrategyKind,
    mu: Vec2,
    z2: Vec2,
    u_held: Vec2,
    p: EtcParams,
) -> Tuple[Vec2, Union[Branch, np.ndarray]]:
    """
    Shaped candidate w and the branch it belongs to. The switched strategy
    shapes w with the rule active at this instant.
    """
    branch = active_branch(strategy, u_held, p)
    if strategy is StrategyKind.CONTINUOUS:
        return np.array(mu, dtype=float, copy=True), branch
    if strategy is StrategyKind.FIXED:
        return shaped_control_fixed(mu, z2, p), branch
    if strategy is StrategyKind.RELATIVE:
        return shaped_control_relative(mu, z2, p), branch
    use_relative = np.asarray(branch) == int(Branch.RELATIVE)
    w = np.where(
        use_relative[..., None],
        shaped_control_relative(mu, z2, p),
        shaped_control_fixed(mu, z2, p),
    )
    return w, branch


def trigger_condition(
    strategy: StrategyKind,
    e: Vec2,
    u_held: Vec2,
    p: EtcParams,
) -> BoolLike:
    """
    Whether an event fires for measurement error e = w − u_held.

    Fixed: ‖e‖ ≥ ς. Relative: ‖e‖ ≥ ζ‖u‖ + ξ. Switched: relative rule while
    ‖u‖ < S, fixed rule otherwise. Continuous: always.
    """
    e = np.asarray(e, dtype=float)
    if strategy is StrategyKind.CONTINUOUS:
        fired = np.ones(e.shape[:-1], dtype=bool)
    elif strategy is StrategyKind.FIXED:
        fired = _fixed_rule(e, p)
    elif strategy is StrategyKind.RELATIVE:
        fired = _relative_rule(e, u_held, p)
    else:
        branch = active_branch(strategy, u_held, p)
        fired = np.where(
            np.asarray(branch) == int(Branch.RELATIVE),
            _relative_rule(e, u_held, p),
            _fixed_rule(e, p),
        )
    fired = np.asarray(fired)
    return bool(fired) if fired.ndim == 0 else fired


def hold_update(
    ts: TriggerState,
    w: Vec2,
    triggered: bool,
    t: float,
    branch: Branch = Branch.NONE,
) -> TriggerState:
    """
    Zero-order hold: on an event the held control becomes w and the event is
    recorded; otherwise the state is left untouched.

    The state is updated in place (event histories grow to one entry per step
    under the continuous strategy) and returned.
    """
    if not triggered:
        return ts
    if ts.last_event_time is not None and t <= ts.last_event_time:
        raise ValueError(f"event times must increase: {t} after {ts.last_event_time}")
    ts.held_control = np.array(w, dtype=float, copy=True)
    ts.last_event_time = t
    ts.event_count += 1
    ts.event_times.append(t)
    ts.event_branches.append(int(branch))
    return ts
