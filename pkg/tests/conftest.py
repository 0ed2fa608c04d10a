import numpy as np
import pytest

from config.sim_config import SimConfig, config_from_dict
from simulation.engine import run_closed_loop
from simulation.sim_log import SimLog


@pytest.fixture
def default_config() -> SimConfig:
    return SimConfig()


def short_config(**overrides) -> SimConfig:
    """Default config over a 2 s horizon, with top-level or nested overrides."""
    data = {'duration': 2.0}
    data.update(overrides)
    return config_from_dict(data)


def synthetic_log(time, position, velocity=None, config: SimConfig = None, **arrays) -> SimLog:
    """SimLog from hand-built arrays; vehicle count taken from position."""
    position = np.asarray(position, dtype=float)
    n = position.shape[1]
    if config is None:
        config = config_from_dict({
            'vehicles': n,
            'duration': float(time[-1]) if time[-1] > 0 else 1.0,
        })
    if velocity is None:
        velocity = np.zeros_like(position)
    return SimLog.from_arrays(config, time, position=position, velocity=velocity, **arrays)


_FULL_RUNS = {}


@pytest.fixture(scope="session")
def full_run():
    """Full-horizon runs, cached per (scenario, strategy) for the session."""
    def get(scenario: str, strategy: str) -> SimLog:
        key = (scenario, strategy)
        if key not in _FULL_RUNS:
            _FULL_RUNS[key] = run_closed_loop(
                config_from_dict({'scenario': scenario, 'strategy': strategy})
            )
        return _FULL_RUNS[key]
    return get
