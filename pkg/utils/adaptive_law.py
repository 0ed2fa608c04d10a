"""
Adaptive Backstepping Law

RBF network approximation of the unknown drag factor, backstepping tracking
errors, the continuous-time control μ and the online adaptation laws.

    z1 = x̂ − xʳ
    α  = −K1 z1
    z2 = v̂ − ẋʳ − α
    μ  = −K2 z2 − z1 − ŴᵀΛ(γ) − κ(z2) σ̂ + α̇ + ẍʳ

    Ŵ_j' = O_j (Λ z2_j − Ξ_j Ŵ_j)              j = 1 (longitudinal), 2 (lateral)
    σ̂'   = Δ [κ(z2) z2 − Υ (σ̂ − σ⁰)]

κ(z2) = diag(sgn z2_1, sgn z2_2) with sgn(0) = 0.

The weight matrix is block diagonal: one length-l weight vector per axis fed
by the same basis vector, so nothing couples the longitudinal and lateral
channels.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from utils.reference_scenario import ReferenceSignal
from utils.vehicle_dynamics import Vec2

DEFAULT_CENTERS = ((0.0, 0.0), (4.0, 0.0), (8.0, 0.0), (12.0, 0.0), (16.0, 0.0))


def _diag2(a: float, b: float) -> np.ndarray:
    return np.diag([float(a), float(b)])


def _check_positive_diag(name: str, m: np.ndarray, size: int):
    m = np.asarray(m, dtype=float)
    if m.shape != (size, size) or np.any(np.diag(m) <= 0):
        raise ValueError(f"{name} must be a {size}x{size} matrix with positive diagonal")


# =============================================================================
# CONFIGURATION AND STATE
# =============================================================================

@dataclass(frozen=True)
class RbfConfig:
    """
    Gaussian RBF layer: l hidden units with centers in (v_x, v_y) space and a
    shared width φ. Defaults cover the 0–16 m/s operating envelope.
    """
    centers: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_CENTERS))
    width: float = 4.0

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[0] < 1 or centers.shape[1] != 2:
            raise ValueError(f"centers must have shape (l, 2) with l >= 1, got {centers.shape}")
        if self.width <= 0:
            raise ValueError(f"RBF width must be > 0, got {self.width}")
        if len(np.unique(centers, axis=0)) != len(centers):
            raise ValueError("RBF centers must be pairwise distinct")
        object.__setattr__(self, 'centers', centers)

    @property
    def n_hidden(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class ControllerGains:
    """
    Controller and adaptation gains.

    K1, K2: 2×2 positive diagonal tracking gains
    O1, O2: l×l positive diagonal adaptation rates (longitudinal, lateral)
    Xi1, Xi2: weight leakage
    Delta, Upsilon: 2×2 positive diagonal σ̂ adaptation gains
    sigma_prior: σ⁰
    """
    K1: np.ndarray = field(default_factory=lambda: _diag2(0.5, 0.5))
    K2: np.ndarray = field(default_factory=lambda: _diag2(20, 20))
    O1: np.ndarray = field(default_factory=lambda: np.eye(5))
    O2: np.ndarray = field(default_factory=lambda: np.eye(5))
    Xi1: float = 0.01
    Xi2: float = 0.01
    Delta: np.ndarray = field(default_factory=lambda: _diag2(0.2, 0.2))
    Upsilon: np.ndarray = field(default_factory=lambda: _diag2(2, 2))
    sigma_prior: Vec2 = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        for name in ('K1', 'K2', 'O1', 'O2', 'Delta', 'Upsilon', 'sigma_prior'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ('K1', 'K2', 'Delta', 'Upsilon'):
            _check_positive_diag(name, getattr(self, name), 2)
        l = np.asarray(self.O1).shape[0]
        _check_positive_diag('O1', self.O1, l)
        _check_positive_diag('O2', self.O2, l)
        if self.Xi1 <= 0 or self.Xi2 <= 0:
            raise ValueError(f"leakage must be > 0, got ({self.Xi1}, {self.Xi2})")

    @property
    def adaptation_rates(self) -> np.ndarray:
        """O1 and O2 stacked into shape (2, l, l)."""
        return np.stack([self.O1, self.O2])

    @property
    def leakage(self) -> np.ndarray:
        return np.array([self.Xi1, self.Xi2])


@dataclass
class AdaptiveState:
    """
    Ŵ with shape (..., 2, l): row 0 is the longitudinal block Ŵ_1, row 1 the
    lateral block Ŵ_2. σ̂ with shape (..., 2).
    """
    W_hat: np.ndarray
    sigma_hat: Vec2

    @classmethod
    def initial(cls, n_hidden: int, sigma_prior: Vec2, n_vehicles: int = None) -> 'AdaptiveState':
        """Zero weights and σ̂ = σ⁰, for one vehicle or a stacked formation."""
        lead = () if n_vehicles is None else (n_vehicles,)
        return cls(
            W_hat=np.zeros(lead + (2, n_hidden)),
            sigma_hat=np.broadcast_to(np.asarray(sigma_prior, dtype=float), lead + (2,)).copy(),
        )

    def weight_norm(self) -> np.ndarray:
        """Frobenius norm of Ŵ per vehicle."""
        return np.sqrt(np.sum(self.W_hat ** 2, axis=(-2, -1)))


class TrackingErrors(NamedTuple):
    z1: Vec2
    z2: Vec2
    alpha: Vec2
    alpha_dot: Vec2


# =============================================================================
# RBF NETWORK
# =============================================================================

def rbf_basis(gamma: Vec2, config: RbfConfig) -> np.ndarray:
    """
    Gaussian basis vector Λ(γ): entry k = exp(−‖γ − γ*_k‖² / φ²).

    Args:
        gamma: Network input(s), shape (..., 2)
        config: Centers and width

    Returns:
        Basis of shape (..., l), entries in (0, 1]
    """
    gamma = np.asarray(gamma, dtype=float)
    diff = gamma[..., None, :] - config.centers
    return np.exp(-np.sum(diff ** 2, axis=-1) / config.width ** 2)


def nn_output(state: AdaptiveState, basis: np.ndarray) -> Vec2:
    """
    Network estimate ŴᵀΛ: axis j output is the dot product of Ŵ_j with the
    shared basis vector.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.shape[-1] != state.W_hat.shape[-1]:
        raise ValueError(
            f"basis length {basis.shape[-1]} does not match {state.W_hat.shape[-1]} hidden units"
        )
    return np.einsum('...jl,...l->...j', state.W_hat, basis)


# =============================================================================
# BACKSTEPPING
# =============================================================================

def tracking_errors(
    x_hat: Vec2,
    v_hat: Vec2,
    ref: ReferenceSignal,
    C1: np.ndarray,
    x_bar: Vec2,
    K1: np.ndarray,
) -> TrackingErrors:
    """
    Position/speed tracking errors and the virtual controller.

    α̇ is differentiated analytically through the observer: ż1 is the observer
    position rate v̂ + C1(x̄ − x̂) minus the reference velocity, so no numerical
    differentiation of noisy estimates is needed.
    """
    z1 = x_hat - ref.position
    alpha = -(z1 @ K1.T)
    z2 = v_hat - ref.velocity - alpha
    z1_dot = v_hat + (x_bar - x_hat) @ C1.T - ref.velocity
    alpha_dot = -(z1_dot @ K1.T)
    return TrackingErrors(z1=z1, z2=z2, alpha=alpha, alpha_dot=alpha_dot)


def continuous_control(
    z1: Vec2,
    z2: Vec2,
    adaptive: AdaptiveState,
    basis: np.ndarray,
    alpha_dot: Vec2,
    ref_accel: Vec2,
    gains: ControllerGains,
) -> Vec2:
    """Continuous-time control μ."""
    return (
        -(z2 @ gains.K2.T)
        - z1
        - nn_output(adaptive, basis)
        - np.sign(z2) * adaptive.sigma_hat
        + alpha_dot
        + ref_accel
    )


def adapt_step(
    adaptive: AdaptiveState,
    basis: np.ndarray,
    z2: Vec2,
    gains: ControllerGains,
    dt: float,
) -> AdaptiveState:
    """
    One Euler step of the weight and σ̂ adaptation laws.

    κ(z2)·z2 is |z2| componentwise.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    drive = basis[..., None, :] * z2[..., :, None] - gains.leakage[:, None] * adaptive.W_hat
    w_rate = np.einsum('jkl,...jl->...jk', gains.adaptation_rates, drive)
    sigma_rate = (np.abs(z2) - (adaptive.sigma_hat - gains.sigma_prior) @ gains.Upsilon.T) @ gains.Delta.T
    return AdaptiveState(
        W_hat=adaptive.W_hat + w_rate * dt,
        sigma_hat=adaptive.sigma_hat + sigma_rate * dt,
    )


def tracking_energy(z1: Vec2, z2: Vec2) -> np.ndarray:
    """½(z1ᵀz1 + z2ᵀz2): the measurable part of the per-vehicle Lyapunov candidate."""
    return 0.5 * (np.sum(z1 ** 2, axis=-1) + np.sum(z2 ** 2, axis=-1))
