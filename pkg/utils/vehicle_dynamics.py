"""
Vehicle Dynamics

Point-mass plant for every vehicle in the formation:

    position' = velocity
    velocity' = u + drag + disturbance

The drag factor is the sum of a quadratic aerodynamic resistance and a
decaying sinusoidal disturbance, both unknown to the controller. The plant is
advanced with a fixed-step explicit Euler integrator.

Every function broadcasts over a leading vehicle axis: one vehicle uses arrays
of shape (2,), a whole formation uses (N, 2) together with stacked params.
"""

from dataclasses import dataclass, fields
from typing import Sequence, Union

import numpy as np

# (longitudinal, lateral) pair; (N, 2) when stacked across a formation
Vec2 = np.ndarray

Scalar = Union[float, np.ndarray]


def vec2(x: float, y: float) -> Vec2:
    """Build a longitudinal/lateral pair."""
    return np.array([x, y], dtype=float)


# =============================================================================
# PARAMETERS AND STATE
# =============================================================================

@dataclass(frozen=True)
class VehicleParams:
    """
    Physical parameters of one vehicle (or column arrays for a formation).

    Defaults are the uniform resistance/disturbance shared by all vehicles:
    air density 1.206 kg/m³, cross-section 5.58 m², drag coefficient 0.3 and
    a 0.3·sin(2πt)·e^(−t/5) m/s² disturbance.
    """
    mass: Scalar
    air_density: Scalar = 1.206
    cross_section: Scalar = 5.58
    drag_coeff: Scalar = 0.3
    disturbance_amp: Scalar = 0.3
    disturbance_freq: Scalar = 2 * np.pi
    disturbance_decay: Scalar = 1 / 5

    def __post_init__(self):
        if np.any(np.asarray(self.mass) <= 0):
            raise ValueError(f"mass must be > 0, got {self.mass}")
        for name in ('air_density', 'cross_section', 'drag_coeff'):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def drag_factor(self) -> Scalar:
        """0.5·ρ·A·Cd / m; times v² gives the drag deceleration."""
        return 0.5 * self.air_density * self.cross_section * self.drag_coeff / self.mass


def stack_params(params: Sequence[VehicleParams]) -> VehicleParams:
    """
    Stack per-vehicle params into (N, 1) column arrays so that a formation of
    heterogeneous vehicles can be stepped with one call.
    """
    if not params:
        raise ValueError("Need at least one VehicleParams to stack")
    columns = {
        f.name: np.array([getattr(p, f.name) for p in params], dtype=float)[:, None]
        for f in fields(VehicleParams)
    }
    return VehicleParams(**columns)


@dataclass
class VehicleState:
    """True plant state: position (m) and velocity (m/s)."""
    position: Vec2
    velocity: Vec2

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.position).all() and np.isfinite(self.velocity).all())


# =============================================================================
# DRAG FACTOR
# =============================================================================

def drag_accel(velocity: Vec2, params: VehicleParams) -> Vec2:
    """
    Aerodynamic resistance per axis: −0.5·ρ·A·Cd·v²·sgn(v) / m.

    The resistance always opposes motion on that axis, so the result is an
    odd function of each velocity component.

    Args:
        velocity: Velocity pair(s), m/s
        params: Vehicle parameters (scalar or stacked)

    Returns:
        Drag acceleration, m/s²
    """
    velocity = np.asarray(velocity, dtype=float)
    return -params.drag_factor * velocity * np.abs(velocity)


def disturbance_accel(t: float, params: VehicleParams) -> Vec2:
    """
    External disturbance, identical on both axes:
        amp · sin(freq·t) · exp(−decay·t)

    Args:
        t: Simulation time, s (must be >= 0)
        params: Vehicle parameters (scalar or stacked)

    Returns:
        Disturbance acceleration pair(s), m/s²
    """
    if t < 0:
        raise ValueError(f"disturbance is defined for t >= 0, got t={t}")
    value = (
        params.disturbance_amp
        * np.sin(params.disturbance_freq * t)
        * np.exp(-params.disturbance_decay * t)
    )
    return value * np.ones(2)


# =============================================================================
# INTEGRATOR
# =============================================================================

def plant_step(
    state: VehicleState,
    u: Vec2,
    t: float,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """
    One explicit-Euler step of the plant. Drag and disturbance are evaluated
    at the start of the step, the same instant the held control refers to.

    Args:
        state: Current true state
        u: Applied (held) control acceleration, m/s²
        t: Time at the start of the step, s
        dt: Step size, s
        params: Vehicle parameters

    Returns:
        New VehicleState at t + dt
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    accel = u + drag_accel(state.velocity, params) + disturbance_accel(t, params)
    return VehicleState(
        position=state.position + state.velocity * dt,
        velocity=state.velocity + accel * dt,
    )
