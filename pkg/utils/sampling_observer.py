"""
Sampling-Based Observer

Each vehicle only measures its own position, intermittently and with bounded
noise (lidar/radar-like). The observer reconstructs position and velocity:

    x̂' = v̂ + C1 (x̄ − x̂)
    v̂' = u + C2 (x̄ − x̂) + Ŵᵀ Λ(γ)

x̄ is the latest sample, held constant between sample instants.
"""

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from utils.vehicle_dynamics import Vec2


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class SamplerConfig:
    """
    Position sampler settings.

    period: time between samples, s (must be a whole number of steps)
    noise_bound: ϱ, half-width of the uniform per-axis noise, m
    seed: base seed; each vehicle draws from its own stream
    """
    period: float = 0.1
    noise_bound: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"sampler period must be > 0, got {self.period}")
        if self.noise_bound < 0:
            raise ValueError(f"noise bound must be >= 0, got {self.noise_bound}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    def steps_per_sample(self, dt: float) -> int:
        """Number of integrator steps between samples; period must be a multiple of dt."""
        ratio = self.period / dt
        stride = int(round(ratio))
        if stride < 1 or abs(ratio - stride) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"sampler period {self.period} is not an integer multiple of dt={dt}")
        return stride


@dataclass(frozen=True)
class ObserverGains:
    """Output injection gains C1 (1/s) and C2 (1/s²), 2×2 diagonal."""
    C1: np.ndarray = field(default_factory=lambda: np.diag([5.0, 5.0]))
    C2: np.ndarray = field(default_factory=lambda: np.diag([50.0, 50.0]))

    def __post_init__(self):
        for name in ('C1', 'C2'):
            m = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, m)
            if m.shape != (2, 2) or np.any(np.diag(m) <= 0):
                raise ValueError(f"{name} must be a 2x2 matrix with positive diagonal, got {m.tolist()}")


@dataclass
class ObserverState:
    """Estimated position x̂ (m), velocity v̂ (m/s) and the held sample x̄ (m)."""
    position_estimate: Vec2
    velocity_estimate: Vec2
    latest_sample: Vec2


# =============================================================================
# SAMPLER
# =============================================================================

def vehicle_rngs(seed: int, n_vehicles: int) -> List[np.random.Generator]:
    """
    One independent generator per vehicle, seeded from (seed, vehicle index),
    so draws do not depend on the order vehicles are processed in.
    """
    return [np.random.default_rng(np.random.SeedSequence([seed, i])) for i in range(n_vehicles)]


def sample_position(
    true_position: Vec2,
    rng: np.random.Generator,
    noise_bound: float,
) -> Vec2:
    """
    Noisy position measurement taken at a sample instant.

    Each axis gets i.i.d. uniform noise on [−ϱ, ϱ], so ‖x̄ − x‖∞ ≤ ϱ holds by
    construction. The generator advances even when ϱ = 0.

    Args:
        true_position: Actual position, m
        rng: The vehicle's generator
        noise_bound: ϱ, m

    Returns:
        Sampled position x̄
    """
    true_position = np.asarray(true_position, dtype=float)
    noise = rng.uniform(-noise_bound, noise_bound, size=true_position.shape)
    return true_position + noise


# =============================================================================
# OBSERVER
# =============================================================================

def observer_step(
    obs: ObserverState,
    u: Vec2,
    nn_output: Vec2,
    gains: ObserverGains,
    dt: float,
) -> ObserverState:
    """
    One Euler step of the observer with the latest sample held.

    Args:
        obs: Current estimate and held sample
        u: Applied (held) control, m/s²
        nn_output: Network estimate of the drag factor, m/s²
        gains: C1, C2
        dt: Step size, s

    Returns:
        Updated ObserverState (latest_sample unchanged)
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    innovation = obs.latest_sample - obs.position_estimate
    position_rate = obs.velocity_estimate + innovation @ gains.C1.T
    velocity_rate = u + innovation @ gains.C2.T + nn_output
    return ObserverState(
        position_estimate=obs.position_estimate + position_rate * dt,
        velocity_estimate=obs.velocity_estimate + velocity_rate * dt,
        latest_sample=obs.latest_sample,
    )


def with_sample(obs: ObserverState, sample: Vec2) -> ObserverState:
    """Replace the held sample at a sample instant."""
    return replace(obs, latest_sample=np.asarray(sample, dtype=float))
