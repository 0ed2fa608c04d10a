"""
Simulation Log

Preallocated per-step record of a closed-loop run. Arrays are indexed
[step, vehicle, axis]; record k holds the state at t = k·dt together with the
references, errors and controls computed from it.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config.sim_config import SimConfig
from utils.event_trigger import Branch, StrategyKind

PAIR_FIELDS = (
    'position',
    'velocity',
    'position_estimate',
    'velocity_estimate',
    'reference_position',
    'z1',
    'z2',
    'mu',
    'w',
    'u',
)
SCALAR_FIELDS = ('w_hat_norm', 'sigma_hat_norm')


@dataclass(frozen=True)
class StepRecord:
    """All logged quantities at one instant, (N, 2) or (N,) arrays."""
    t: float
    position: np.ndarray
    velocity: np.ndarray
    position_estimate: np.ndarray
    velocity_estimate: np.ndarray
    reference_position: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    u: np.ndarray
    triggered: np.ndarray
    branch: np.ndarray
    w_hat_norm: np.ndarray
    sigma_hat_norm: np.ndarray


@dataclass
class SimLog:
    config: SimConfig
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    position_estimate: np.ndarray
    velocity_estimate: np.ndarray
    reference_position: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    u: np.ndarray
    triggered: np.ndarray
    branch: np.ndarray
    w_hat_norm: np.ndarray
    sigma_hat_norm: np.ndarray
    event_times: List[List[float]] = field(default_factory=list)
    event_branches: List[List[int]] = field(default_factory=list)

    @classmethod
    def allocate(cls, config: SimConfig) -> 'SimLog':
        """Zero-filled log sized for duration/dt + 1 records."""
        k = config.n_steps + 1
        n = config.vehicles
        pairs = {name: np.zeros((k, n, 2)) for name in PAIR_FIELDS}
        scalars = {name: np.zeros((k, n)) for name in SCALAR_FIELDS}
        return cls(
            config=config,
            time=np.arange(k) * config.dt,
            triggered=np.zeros((k, n), dtype=bool),
            branch=np.zeros((k, n), dtype=np.int8),
            event_times=[[] for _ in range(n)],
            event_branches=[[] for _ in range(n)],
            **pairs,
            **scalars,
        )

    @classmethod
    def from_arrays(cls, config: SimConfig, time: np.ndarray, **arrays) -> 'SimLog':
        """
        Build a log from existing arrays (a reloaded CSV or a synthetic test
        log). Missing arrays are zero-filled; event histories are rebuilt from
        the triggered flags.
        """
        time = np.asarray(time, dtype=float)
        k = time.shape[0]
        n = config.vehicles
        unknown = set(arrays) - set(PAIR_FIELDS) - set(SCALAR_FIELDS) - {'triggered', 'branch'}
        if unknown:
            raise ValueError(f"unknown log arrays: {sorted(unknown)}")

        def take(name, shape, dtype=float):
            if name not in arrays or arrays[name] is None:
                return np.zeros(shape, dtype=dtype)
            value = np.asarray(arrays[name], dtype=dtype)
            if value.shape != shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {shape}")
            return value

        log = cls(
            config=config,
            time=time,
            triggered=take('triggered', (k, n), bool),
            branch=take('branch', (k, n), np.int8),
            **{name: take(name, (k, n, 2)) for name in PAIR_FIELDS},
            **{name: take(name, (k, n)) for name in SCALAR_FIELDS},
        )
        log.rebuild_events()
        return log

    def rebuild_events(self):
        """Derive event_times / event_branches from the triggered flags."""
        self.event_times = []
        self.event_branches = []
        for i in range(self.n_vehicles):
            steps = np.flatnonzero(self.triggered[:, i])
            self.event_times.append(self.time[steps].tolist())
            self.event_branches.append(self.branch[steps, i].astype(int).tolist())

    @property
    def n_records(self) -> int:
        return self.time.shape[0]

    @property
    def n_vehicles(self) -> int:
        return self.position.shape[1]

    @property
    def strategy(self) -> StrategyKind:
        return self.config.strategy

    def record(self, k: int) -> StepRecord:
        """Snapshot of record k (copies)."""
        return StepRecord(
            t=float(self.time[k]),
            triggered=self.triggered[k].copy(),
            branch=self.branch[k].copy(),
            **{name: getattr(self, name)[k].copy() for name in PAIR_FIELDS + SCALAR_FIELDS},
        )

    def window_mask(self, t0: float, t1: Optional[float] = None) -> np.ndarray:
        """Boolean mask of records with t0 <= t <= t1 (small tolerance on both ends)."""
        tol = 1e-9
        if t1 is None:
            t1 = self.time[-1]
        return (self.time >= t0 - tol) & (self.time <= t1 + tol)

    def event_count(self, vehicle: int, branch: Optional[Branch] = None) -> int:
        """Events of vehicle index (0-based), optionally restricted to one branch."""
        if branch is None:
            return len(self.event_times[vehicle])
        return sum(1 for b in self.event_branches[vehicle] if b == int(branch))
