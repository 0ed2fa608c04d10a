"""
Reference Scenario

Expected trajectories for the formation.

Leader: piecewise-linear speed profile
    10 m/s cruise          0 s ≤ t < 25 s
    braking at 1 m/s²     25 s ≤ t < 31 s
    4 m/s cruise          31 s ≤ t ≤ 50 s
with zero lateral speed. Position is the exact closed-form integral.

Followers: the reference position is the observed position of the preceding
vehicle minus the expected inter-vehicle offset l_i; the reference speed and
acceleration are chained from the leader profile.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from utils.vehicle_dynamics import Vec2, vec2


class ReferenceRangeError(ValueError):
    """Raised when the leader profile is queried outside its horizon."""


class ScenarioKind(Enum):
    """Formation scenarios"""
    LINEAR = "linear"
    SQUARE = "square"
    LINEAR_QUEUE = "linear-queue"


# ---------------------------------------------------------------------------
# Leader profile constants
# ---------------------------------------------------------------------------

CRUISE_SPEED = 10.0       # m/s
FINAL_SPEED = 4.0         # m/s
BRAKE_START = 25.0        # s
BRAKE_END = 31.0          # s
BRAKE_DECEL = (CRUISE_SPEED - FINAL_SPEED) / (BRAKE_END - BRAKE_START)   # 1 m/s²
HORIZON = 50.0            # s

_TIME_TOL = 1e-9

# Expected inter-vehicle distances l_i = (longitudinal, lateral), AV1..AV4
SCENARIO_OFFSETS: Dict[ScenarioKind, List[Tuple[float, float]]] = {
    ScenarioKind.LINEAR:       [(0, 0), (10, 0), (10, 0), (10, 0)],
    ScenarioKind.SQUARE:       [(0, 0), (0, 3.6), (10, -3.6), (0, 3.6)],
    ScenarioKind.LINEAR_QUEUE: [(0, 0), (10, 0), (20, 0), (10, 0)],
}


# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True)
class FormationOffsets:
    """Per-vehicle expected offsets, row i-1 holds l_i. l_1 is always (0, 0)."""
    offsets: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        if offsets.ndim != 2 or offsets.shape[1] != 2:
            raise ValueError(f"offsets must have shape (N, 2), got {offsets.shape}")
        if not np.array_equal(offsets[0], np.zeros(2)):
            raise ValueError(f"leader offset l_1 must be (0, 0), got {tuple(offsets[0])}")
        object.__setattr__(self, 'offsets', offsets)

    @property
    def n_vehicles(self) -> int:
        return self.offsets.shape[0]

    def for_vehicle(self, i: int) -> Vec2:
        """Offset l_i for vehicle number i (1-based)."""
        return self.offsets[i - 1]


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference position (m), velocity (m/s) and acceleration (m/s²)."""
    position: Vec2
    velocity: Vec2
    acceleration: Vec2


# =============================================================================
# LEADER
# =============================================================================

def leader_speed(t: float) -> Tuple[float, float]:
    """Longitudinal (speed, acceleration) of the leader profile at time t."""
    if t < BRAKE_START:
        return CRUISE_SPEED, 0.0
    if t < BRAKE_END:
        return CRUISE_SPEED - BRAKE_DECEL * (t - BRAKE_START), -BRAKE_DECEL
    return FINAL_SPEED, 0.0


def _leader_distance(t: float) -> float:
    """Closed-form integral of the speed profile from 0 to t."""
    if t < BRAKE_START:
        return CRUISE_SPEED * t
    cruise = CRUISE_SPEED * BRAKE_START
    if t < BRAKE_END:
        tau = t - BRAKE_START
        return cruise + CRUISE_SPEED * tau - 0.5 * BRAKE_DECEL * tau ** 2
    brake_len = BRAKE_END - BRAKE_START
    braking = CRUISE_SPEED * brake_len - 0.5 * BRAKE_DECEL * brake_len ** 2
    return cruise + braking + FINAL_SPEED * (t - BRAKE_END)


def leader_reference(t: float, origin: Vec2) -> ReferenceSignal:
    """
    Leader reference at time t.

    Args:
        t: Time in [0, 50] s
        origin: Reference position at t = 0

    Returns:
        ReferenceSignal with closed-form position, profile velocity and
        piecewise acceleration

    Raises:
        ReferenceRangeError: t outside [0, 50]
    """
    if t < -_TIME_TOL or t > HORIZON + _TIME_TOL:
        raise ReferenceRangeError(f"leader reference defined on [0, {HORIZON:g}] s, got t={t}")
    t = min(max(t, 0.0), HORIZON)
    speed, accel = leader_speed(t)
    origin = np.asarray(origin, dtype=float)
    return ReferenceSignal(
        position=origin + vec2(_leader_distance(t), 0.0),
        velocity=vec2(speed, 0.0),
        acceleration=vec2(accel, 0.0),
    )


# =============================================================================
# FOLLOWERS
# =============================================================================

def follower_reference(
    i: int,
    predecessor_observed_position: Vec2,
    offsets: FormationOffsets,
    leader_ref: ReferenceSignal,
) -> ReferenceSignal:
    """
    Reference for follower i (1-based, i >= 2).

    Position is the observed predecessor position minus l_i on both axes;
    velocity and acceleration are the leader's.
    """
    if i < 2:
        raise ValueError(f"follower_reference needs i >= 2, got i={i} (the leader uses leader_reference)")
    return ReferenceSignal(
        position=np.asarray(predecessor_observed_position, dtype=float) - offsets.for_vehicle(i),
        velocity=leader_ref.velocity.copy(),
        acceleration=leader_ref.acceleration.copy(),
    )


def formation_reference(
    observed_positions: np.ndarray,
    offsets: FormationOffsets,
    leader_ref: ReferenceSignal,
) -> ReferenceSignal:
    """
    References for the whole formation in one pass, as (N, 2) arrays.

    Row 0 is the leader reference, row i is follower_reference(i + 1, ...)
    built from the observed position of row i - 1.
    """
    observed_positions = np.asarray(observed_positions, dtype=float)
    n = observed_positions.shape[0]
    if n != offsets.n_vehicles:
        raise ValueError(f"{n} observed positions for {offsets.n_vehicles} offsets")
    position = np.empty((n, 2))
    position[0] = leader_ref.position
    position[1:] = observed_positions[:-1] - offsets.offsets[1:]
    return ReferenceSignal(
        position=position,
        velocity=np.tile(leader_ref.velocity, (n, 1)),
        acceleration=np.tile(leader_ref.acceleration, (n, 1)),
    )


def scenario_offsets(kind: ScenarioKind, n_vehicles: int = 4) -> FormationOffsets:
    """
    Expected inter-vehicle distances for a scenario.

    Args:
        kind: Scenario
        n_vehicles: Formation size; at most the four tabulated vehicles

    Returns:
        FormationOffsets for AV1..AVn
    """
    table = SCENARIO_OFFSETS[kind]
    if n_vehicles > len(table):
        raise ValueError(
            f"scenario '{kind.value}' defines offsets for {len(table)} vehicles, "
            f"got {n_vehicles}; supply formation.offsets explicitly"
        )
    return FormationOffsets(np.array(table[:n_vehicles], dtype=float))
