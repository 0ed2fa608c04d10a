"""
Simulation Configuration

Validated configuration tree for a formation run, loaded from a YAML
document. Every omitted key takes its documented default; unknown keys are
rejected with their field path.

The models also convert themselves into the runtime dataclasses used by the
numerical libraries in utils/.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.adaptive_law import DEFAULT_CENTERS, ControllerGains, RbfConfig
from utils.event_trigger import EtcParams, StrategyKind, SwitchPairing
from utils.reference_scenario import HORIZON, FormationOffsets, ScenarioKind, scenario_offsets
from utils.sampling_observer import ObserverGains, SamplerConfig
from utils.vehicle_dynamics import VehicleParams, VehicleState, vec2

Pair = Tuple[float, float]


class ConfigError(ValueError):
    """Invalid or malformed configuration document."""


# ---------------------------------------------------------------------------
# Initial conditions (AV1..AV4)
# ---------------------------------------------------------------------------

DEFAULT_POSITIONS: List[Pair] = [(28, 5.4), (24, 2.0), (18, 9.0), (12, 1.8)]
DEFAULT_POSITION_ESTIMATES: List[Pair] = [(26, 5.0), (22, 1.6), (16, 8.6), (14, 1.4)]
DEFAULT_VELOCITIES: List[Pair] = [(14, 0), (16, 0), (16, 0), (17, 0)]
DEFAULT_VELOCITY_ESTIMATES: List[Pair] = [(12, 0), (18, 0), (16, 0), (14, 0)]
DEFAULT_MASSES: List[float] = [1760.0, 1920.0, 1660.0, 1890.0]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=False)


def _positive_pair(value: Pair, label: str) -> Pair:
    if value[0] <= 0 or value[1] <= 0:
        raise ValueError(f"{label} diagonal entries must be > 0")
    return value


# =============================================================================
# SECTIONS
# =============================================================================

class PlantSettings(_Section):
    masses: List[float] = Field(default_factory=lambda: list(DEFAULT_MASSES))
    air_density: float = Field(1.206, ge=0)
    cross_section: float = Field(5.58, ge=0)
    drag_coeff: float = Field(0.3, ge=0)
    disturbance_amp: float = 0.3
    disturbance_freq: float = 2 * math.pi
    disturbance_decay: float = 0.2

    @field_validator('masses')
    @classmethod
    def _masses_positive(cls, v):
        if any(m <= 0 for m in v):
            raise ValueError("every mass must be > 0")
        return v


class SamplerSettings(_Section):
    period: float = Field(0.1, gt=0)
    noise_bound: float = Field(0.1, ge=0)


class ObserverSettings(_Section):
    c1: Pair = (5.0, 5.0)
    c2: Pair = (50.0, 50.0)

    @field_validator('c1', 'c2')
    @classmethod
    def _diag_positive(cls, v, info):
        return _positive_pair(v, info.field_name)


class RbfSettings(_Section):
    hidden_units: int = Field(5, ge=1)
    centers: List[Pair] = Field(default_factory=lambda: [tuple(c) for c in DEFAULT_CENTERS])
    width: float = Field(4.0, gt=0)
    input: str = Field("velocity_estimate", pattern="^(velocity_estimate|reference_velocity)$")

    @model_validator(mode='after')
    def _centers_match(self):
        if len(self.centers) != self.hidden_units:
            raise ValueError(
                f"centers lists {len(self.centers)} points for {self.hidden_units} hidden units"
            )
        if len(set(self.centers)) != len(self.centers):
            raise ValueError("centers must be pairwise distinct")
        return self


class ControllerSettings(_Section):
    k1: Pair = (0.5, 0.5)
    k2: Pair = (20.0, 20.0)
    adaptation_rate: Pair = (1.0, 1.0)
    leakage: Pair = (0.01, 0.01)
    delta: Pair = (0.2, 0.2)
    upsilon: Pair = (2.0, 2.0)
    sigma_prior: Pair = (0.0, 0.0)

    @field_validator('k1', 'k2', 'adaptation_rate', 'leakage', 'delta', 'upsilon')
    @classmethod
    def _diag_positive(cls, v, info):
        return _positive_pair(v, info.field_name)


class TriggerSettings(_Section):
    fixed_threshold: float = Field(2.0, gt=0)
    fixed_shaping: float = 2.5
    smoothing: Pair = (0.5, 0.5)
    relative_slope: float = 0.9
    relative_floor: float = Field(0.1, gt=0)
    relative_shaping: float = 2.0
    switch_boundary: float = Field(0.55, gt=0)
    switch_pairing: SwitchPairing = SwitchPairing.THRESHOLD

    @field_validator('relative_slope')
    @classmethod
    def _slope_range(cls, v):
        if not 0 < v < 1:
            raise ValueError(f"0<ζ<1 required, got ζ={v}")
        return v

    @field_validator('smoothing')
    @classmethod
    def _smoothing_positive(cls, v):
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("ε1, ε2 must be > 0")
        return v

    @model_validator(mode='after')
    def _shaping_bounds(self):
        if not self.fixed_shaping > self.fixed_threshold:
            raise ValueError(
                f"ς̄ > ς required, got ς̄={self.fixed_shaping}, ς={self.fixed_threshold}"
            )
        bound = self.relative_floor / (1 - self.relative_slope)
        if not self.relative_shaping > bound:
            raise ValueError(
                f"ξ̄ > ξ/(1−ζ) = {bound:g} required, got ξ̄={self.relative_shaping}"
            )
        return self


class InitialConditions(_Section):
    position: List[Pair] = Field(default_factory=lambda: list(DEFAULT_POSITIONS))
    position_estimate: List[Pair] = Field(default_factory=lambda: list(DEFAULT_POSITION_ESTIMATES))
    velocity: List[Pair] = Field(default_factory=lambda: list(DEFAULT_VELOCITIES))
    velocity_estimate: List[Pair] = Field(default_factory=lambda: list(DEFAULT_VELOCITY_ESTIMATES))


class FormationSettings(_Section):
    offsets: Optional[List[Pair]] = None
    reference_origin: Optional[Pair] = None


class Ceilings(_Section):
    """Post-transient sup-norm ceilings for the boundedness report."""
    z1: float = Field(1.0, gt=0)
    z2: float = Field(3.0, gt=0)
    observer_position: float = Field(1.0, gt=0)
    observer_velocity: float = Field(3.0, gt=0)
    weights: float = Field(100.0, gt=0)
    sigma: float = Field(10.0, gt=0)


class MetricsSettings(_Section):
    transient: float = Field(20.0, ge=0)
    headway_window: Pair = (35.0, 50.0)
    safety_window: Optional[Pair] = None
    ceilings: Ceilings = Field(default_factory=Ceilings)


# =============================================================================
# ROOT
# =============================================================================

class SimConfig(_Section):
    """Complete description of one closed-loop run."""
    vehicles: int = 4
    duration: float = 50.0
    dt: float = 0.001
    scenario: ScenarioKind = ScenarioKind.LINEAR
    strategy: StrategyKind = StrategyKind.FIXED
    seed: int = Field(0, ge=0)
    plant: PlantSettings = Field(default_factory=PlantSettings)
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    observer: ObserverSettings = Field(default_factory=ObserverSettings)
    rbf: RbfSettings = Field(default_factory=RbfSettings)
    controller: ControllerSettings = Field(default_factory=ControllerSettings)
    trigger: TriggerSettings = Field(default_factory=TriggerSettings)
    initial: InitialConditions = Field(default_factory=InitialConditions)
    formation: FormationSettings = Field(default_factory=FormationSettings)
    metrics: MetricsSettings = Field(default_factory=MetricsSettings)

    @model_validator(mode='after')
    def _cross_checks(self):
        n = self.vehicles
        if n < 2:
            raise ValueError(f"vehicles must be >= 2, got {n}")
        if not 0 < self.duration <= HORIZON:
            raise ValueError(f"duration must be in (0, {HORIZON:g}] s, got {self.duration}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        ratio = self.sampler.period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(
                f"sampler.period ({self.sampler.period}) must be an integer multiple of dt ({self.dt})"
            )

        if self.formation.offsets is not None:
            if len(self.formation.offsets) != n:
                raise ValueError(f"formation.offsets must list {n} vehicles")
            if tuple(self.formation.offsets[0]) != (0, 0):
                raise ValueError("formation.offsets[0] (the leader) must be (0, 0)")
        elif n > 4:
            raise ValueError("formation.offsets is required for more than 4 vehicles")

        # Defaults describe four vehicles; smaller formations take the first N.
        _fit_list(self.plant, 'masses', n)
        for name in ('position', 'position_estimate', 'velocity', 'velocity_estimate'):
            _fit_list(self.initial, name, n)

        return self

    # -----------------------------------------------------------------------
    # Conversion into runtime objects
    # -----------------------------------------------------------------------

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def vehicle_params(self) -> List[VehicleParams]:
        p = self.plant
        return [
            VehicleParams(
                mass=m,
                air_density=p.air_density,
                cross_section=p.cross_section,
                drag_coeff=p.drag_coeff,
                disturbance_amp=p.disturbance_amp,
                disturbance_freq=p.disturbance_freq,
                disturbance_decay=p.disturbance_decay,
            )
            for m in p.masses
        ]

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(period=self.sampler.period, noise_bound=self.sampler.noise_bound, seed=self.seed)

    def observer_gains(self) -> ObserverGains:
        return ObserverGains(C1=np.diag(self.observer.c1), C2=np.diag(self.observer.c2))

    def rbf_config(self) -> RbfConfig:
        return RbfConfig(centers=np.array(self.rbf.centers, dtype=float), width=self.rbf.width)

    def controller_gains(self) -> ControllerGains:
        c = self.controller
        l = self.rbf.hidden_units
        return ControllerGains(
            K1=np.diag(c.k1),
            K2=np.diag(c.k2),
            O1=c.adaptation_rate[0] * np.eye(l),
            O2=c.adaptation_rate[1] * np.eye(l),
            Xi1=c.leakage[0],
            Xi2=c.leakage[1],
            Delta=np.diag(c.delta),
            Upsilon=np.diag(c.upsilon),
            sigma_prior=np.array(c.sigma_prior, dtype=float),
        )

    def etc_params(self) -> EtcParams:
        t = self.trigger
        return EtcParams(
            fixed_threshold=t.fixed_threshold,
            fixed_shaping=t.fixed_shaping,
            smoothing=np.array(t.smoothing, dtype=float),
            relative_slope=t.relative_slope,
            relative_floor=t.relative_floor,
            relative_shaping=t.relative_shaping,
            switch_boundary=t.switch_boundary,
            switch_pairing=t.switch_pairing,
        )

    def formation_offsets(self) -> FormationOffsets:
        if self.formation.offsets is not None:
            return FormationOffsets(np.array(self.formation.offsets, dtype=float))
        return scenario_offsets(self.scenario, self.vehicles)

    def initial_state(self) -> VehicleState:
        """True initial state of the formation, (N, 2) arrays."""
        return VehicleState(
            position=np.array(self.initial.position, dtype=float),
            velocity=np.array(self.initial.velocity, dtype=float),
        )

    def reference_origin(self):
        """Leader reference position at t=0; defaults to the leader's initial estimate."""
        if self.formation.reference_origin is not None:
            return vec2(*self.formation.reference_origin)
        return vec2(*self.initial.position_estimate[0])


def _fit_list(section: BaseModel, name: str, n: int):
    values = getattr(section, name)
    if name not in section.model_fields_set and len(values) > n:
        setattr(section, name, list(values[:n]))
        values = getattr(section, name)
    if len(values) != n:
        raise ValueError(f"{name} must list {n} vehicles, got {len(values)}")


# =============================================================================
# DOCUMENT I/O
# =============================================================================

def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = '.'.join(str(part) for part in err['loc']) or '<root>'
        lines.append(f"{path}: {err['msg']}")
    return '; '.join(lines)


def config_from_dict(data: dict) -> SimConfig:
    """Validate a mapping into a SimConfig, raising ConfigError with field paths."""
    try:
        return SimConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from e


def parse_config(text: str) -> SimConfig:
    """
    Parse a YAML configuration document.

    Args:
        text: Document text (an empty document yields the full default config)

    Returns:
        Fully populated SimConfig

    Raises:
        ConfigError: malformed YAML, unknown keys or violated invariants
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config document: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config document must be a mapping, got {type(data).__name__}")
    return config_from_dict(data)


def apply_overrides(config: SimConfig, **overrides) -> SimConfig:
    """Return a re-validated copy with top-level keys replaced (None values ignored)."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    data = config.model_dump(mode='json')
    data.update({k: v.value if hasattr(v, 'value') else v for k, v in updates.items()})
    return config_from_dict(data)


def dump_config(config: SimConfig) -> str:
    """YAML text that parses back to an identical SimConfig."""
    return yaml.safe_dump(config.model_dump(mode='json'), sort_keys=False, allow_unicode=True)
