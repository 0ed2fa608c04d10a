"""
Formation Metrics

Post-processing of a SimLog into evaluation quantities.

Metrics computed:
    trigger_counts          - events per vehicle, split by threshold rule
    min_pairwise_distance   - closest approach of every vehicle pair (m)
    time_headway            - longitudinal gap / follower speed (s)
    boundedness_report      - post-transient sup norms against ceilings,
                              Zeno check, tracking-energy envelope
    inter_event_intervals   - min / mean / max time between events
    formation_convergence   - gap errors and lateral spread at a given time

All functions are pure; results depend only on the log.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from simulation.sim_log import SimLog
from utils.adaptive_law import tracking_energy
from utils.event_trigger import Branch

Window = Tuple[float, float]

_TIME_TOL = 1e-9


class MetricsError(ValueError):
    """A metric cannot be computed from the given log or window."""


def _label(i: int) -> str:
    return f"AV{i + 1}"


def _norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.square(a), axis=-1))


def _window_mask(log: SimLog, window: Optional[Window]) -> Tuple[np.ndarray, Window]:
    if window is None:
        window = (float(log.time[0]), float(log.time[-1]))
    t0, t1 = float(window[0]), float(window[1])
    if not t0 < t1:
        raise MetricsError(f"window must satisfy t0 < t1, got [{t0}, {t1}]")
    mask = log.window_mask(t0, t1)
    if not mask.any():
        raise MetricsError(f"window [{t0}, {t1}] contains no records (run covers "
                           f"[{log.time[0]:g}, {log.time[-1]:g}] s)")
    return mask, (t0, t1)


# ---------------------------------------------------------------------------
# Trigger counts
# ---------------------------------------------------------------------------

def trigger_counts(log: SimLog) -> pd.DataFrame:
    """
    Events per vehicle.

    Returns:
        DataFrame indexed AV1..AVN with columns total, relative, fixed. Under
        the switched strategy total = relative + fixed; under continuous both
        branch columns are 0.
    """
    rows = []
    for i in range(log.n_vehicles):
        rows.append({
            'vehicle': _label(i),
            'total': log.event_count(i),
            'relative': log.event_count(i, Branch.RELATIVE),
            'fixed': log.event_count(i, Branch.FIXED),
        })
    return pd.DataFrame(rows).set_index('vehicle')


def inter_event_intervals(log: SimLog) -> pd.DataFrame:
    """Per-vehicle event count and min / mean / max inter-event interval (NaN below two events)."""
    rows = []
    for i in range(log.n_vehicles):
        gaps = np.diff(np.asarray(log.event_times[i], dtype=float))
        rows.append({
            'vehicle': _label(i),
            'events': len(log.event_times[i]),
            'min': float(gaps.min()) if gaps.size else float('nan'),
            'mean': float(gaps.mean()) if gaps.size else float('nan'),
            'max': float(gaps.max()) if gaps.size else float('nan'),
        })
    return pd.DataFrame(rows).set_index('vehicle')


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SafetyReport:
    """Minimum center-to-center distance per unordered vehicle pair."""
    window: Window
    pairs: pd.DataFrame     # columns: pair, min_distance, time

    @property
    def overall_min(self) -> float:
        return float(self.pairs['min_distance'].min())

    def to_dict(self) -> dict:
        return {
            'window': list(self.window),
            'min_distance': self.overall_min,
            'pairs': {
                row.pair: {'min_distance': float(row.min_distance), 'time': float(row.time)}
                for row in self.pairs.itertuples()
            },
        }


def min_pairwise_distance(log: SimLog, window: Optional[Window] = None) -> SafetyReport:
    """
    Closest approach of every vehicle pair, from true positions.

    Args:
        log: Simulation log
        window: (t0, t1) in seconds; whole run when None

    Raises:
        MetricsError: empty or inverted window
    """
    mask, window = _window_mask(log, window)
    positions = log.position[mask]
    times = log.time[mask]
    rows = []
    for i, j in combinations(range(log.n_vehicles), 2):
        dist = _norm(positions[:, i] - positions[:, j])
        k = int(np.argmin(dist))
        rows.append({
            'pair': f"{_label(i)}-{_label(j)}",
            'min_distance': float(dist[k]),
            'time': float(times[k]),
        })
    return SafetyReport(window=window, pairs=pd.DataFrame(rows))


# ---------------------------------------------------------------------------
# Time headway
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeadwayStats:
    """
    series: headway per follower (columns AV2..AVN, index t); NaN where the
            follower's longitudinal speed is not positive
    stats:  per follower max, min, range, mean and the excluded instant count
    """
    window: Window
    series: pd.DataFrame
    stats: pd.DataFrame

    def to_dict(self) -> dict:
        return {
            'window': list(self.window),
            'followers': {
                name: {key: (int(v) if key == 'excluded' else float(v)) for key, v in row.items()}
                for name, row in self.stats.to_dict(orient='index').items()
            },
        }


def summary_headway_window(log: SimLog) -> Window:
    """Configured headway window, or the whole run when the window does not fit inside it."""
    t0, t1 = log.config.metrics.headway_window
    if 0 <= t0 < t1 <= log.config.duration:
        return (t0, t1)
    return (0.0, float(log.config.duration))


def time_headway(log: SimLog, window: Optional[Window] = None) -> HeadwayStats:
    """
    τ = h / v with h the longitudinal center-to-center gap to the predecessor
    and v the follower's longitudinal speed. Instants with v <= 0 are excluded
    and counted.

    Raises:
        MetricsError: empty window, or a follower never moves forward in it
    """
    mask, window = _window_mask(log, window)
    times = log.time[mask]
    x = log.position[mask, :, 0]
    vx = log.velocity[mask, :, 0]

    series = {}
    rows = []
    for i in range(1, log.n_vehicles):
        gap = x[:, i - 1] - x[:, i]
        speed = vx[:, i]
        valid = speed > 0
        if not valid.any():
            raise MetricsError(
                f"{_label(i)} has no positive speed in window [{window[0]:g}, {window[1]:g}] s"
            )
        tau = np.full(gap.shape, np.nan)
        tau[valid] = gap[valid] / speed[valid]
        series[_label(i)] = tau
        defined = tau[valid]
        rows.append({
            'vehicle': _label(i),
            'max': float(defined.max()),
            'min': float(defined.min()),
            'range': float(defined.max() - defined.min()),
            'mean': float(defined.mean()),
            'excluded': int((~valid).sum()),
        })
        if (~valid).any():
            logger.warning(f"{_label(i)}: {(~valid).sum()} headway instants excluded (speed <= 0)")

    return HeadwayStats(
        window=window,
        series=pd.DataFrame(series, index=pd.Index(times, name='t')),
        stats=pd.DataFrame(rows).set_index('vehicle'),
    )


# ---------------------------------------------------------------------------
# Boundedness
# ---------------------------------------------------------------------------

def _sup_norms(log: SimLog, mask: np.ndarray) -> Dict[str, np.ndarray]:
    return {
        'z1': _norm(log.z1[mask]).max(axis=0),
        'z2': _norm(log.z2[mask]).max(axis=0),
        'observer_position': _norm(log.position_estimate[mask] - log.position[mask]).max(axis=0),
        'observer_velocity': _norm(log.velocity_estimate[mask] - log.velocity[mask]).max(axis=0),
        'weights': np.abs(log.w_hat_norm[mask]).max(axis=0),
        'sigma': np.abs(log.sigma_hat_norm[mask]).max(axis=0),
    }


def _all_finite(log: SimLog) -> bool:
    arrays = (
        log.position, log.velocity, log.position_estimate, log.velocity_estimate,
        log.reference_position, log.z1, log.z2, log.mu, log.w, log.u,
        log.w_hat_norm, log.sigma_hat_norm,
    )
    return all(bool(np.isfinite(a).all()) for a in arrays)


def boundedness_report(
    log: SimLog,
    transient: Optional[float] = None,
    ceilings: Optional[Dict[str, float]] = None,
) -> dict:
    """
    Post-transient sup norms of every closed-loop signal, checked against
    configured ceilings.

    Also reports the minimum inter-event interval per vehicle (no two events
    closer than one step) and the tracking-energy envelope: the sup of
    ½(‖z1‖² + ‖z2‖²) after the transient must not exceed its sup over the
    first second.

    Args:
        log: Simulation log
        transient: Start of the post-transient window, s (config default)
        ceilings: quantity -> ceiling (config default)

    Returns:
        Dict with finite, passed, violations, sup, ceilings, min_inter_event
        and tracking_energy entries
    """
    settings = log.config.metrics
    if transient is None:
        transient = settings.transient
    if ceilings is None:
        ceilings = settings.ceilings.model_dump()

    mask = log.time >= transient - _TIME_TOL
    if not mask.any():
        logger.warning(f"transient {transient:g}s beyond the run, using the whole log")
        mask = np.ones_like(log.time, dtype=bool)

    finite = _all_finite(log)
    sups = _sup_norms(log, mask)
    violations = []
    if not finite:
        violations.append("non-finite values in log")
    for name, values in sups.items():
        ceiling = ceilings.get(name)
        if ceiling is None:
            continue
        for i, v in enumerate(values):
            if not v <= ceiling:
                violations.append(f"{_label(i)} {name} sup {v:.6g} exceeds {ceiling:g}")

    dt = log.config.dt
    intervals = inter_event_intervals(log)
    min_interval = {}
    for name, row in intervals.iterrows():
        min_interval[name] = float(row['min']) if row['events'] >= 2 else None
        if row['events'] >= 2 and not row['min'] >= dt - _TIME_TOL:
            violations.append(f"{name} inter-event interval {row['min']:g}s below dt")

    energy = tracking_energy(log.z1, log.z2)
    early = log.time <= min(1.0, float(log.time[-1])) + _TIME_TOL
    energy_report = {}
    for i in range(log.n_vehicles):
        post = float(energy[mask, i].max())
        initial = float(energy[early, i].max())
        ok = post <= initial
        energy_report[_label(i)] = {
            'post_transient_sup': post,
            'initial_sup': initial,
            'envelope_ok': bool(ok),
        }
        if not ok:
            violations.append(f"{_label(i)} tracking energy grows after the transient")

    return {
        'transient': float(transient),
        'finite': finite,
        'passed': not violations,
        'violations': violations,
        'ceilings': {k: float(v) for k, v in ceilings.items()},
        'sup': {
            name: {_label(i): float(v) for i, v in enumerate(values)}
            for name, values in sups.items()
        },
        'min_inter_event': min_interval,
        'tracking_energy': energy_report,
    }


def boundedness_table(report: dict) -> pd.DataFrame:
    """Flatten a boundedness report into one row per vehicle."""
    table = pd.DataFrame(report['sup'])
    table['min_inter_event'] = pd.Series(report['min_inter_event'])
    table['energy_envelope_ok'] = pd.Series(
        {name: e['envelope_ok'] for name, e in report['tracking_energy'].items()}
    )
    table.index.name = 'vehicle'
    return table


# ---------------------------------------------------------------------------
# Convergence
# ---------------------------------------------------------------------------

def formation_convergence(log: SimLog, at: float) -> dict:
    """
    Formation error at time `at` versus t = 0.

    gap_error: (predecessor − follower position) − l_i, per follower
    lateral_spread: max − min lateral position over all vehicles
    """
    if not log.time[0] - _TIME_TOL <= at <= log.time[-1] + _TIME_TOL:
        raise MetricsError(f"time {at} outside the run [{log.time[0]:g}, {log.time[-1]:g}] s")
    k = int(np.argmin(np.abs(log.time - at)))
    offsets = log.config.formation_offsets().offsets
    positions = log.position[k]
    gaps = positions[:-1] - positions[1:] - offsets[1:]
    spread = float(np.ptp(positions[:, 1]))
    initial = float(np.ptp(log.position[0, :, 1]))
    return {
        'time': float(log.time[k]),
        'gap_error': {_label(i + 1): [float(g[0]), float(g[1])] for i, g in enumerate(gaps)},
        'lateral_spread': spread,
        'initial_lateral_spread': initial,
        'spread_ratio': spread / initial if initial > 0 else float('nan'),
    }


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------

def summarize(log: SimLog) -> dict:
    """
    Metrics summary document with sections run, trigger_counts, safety,
    headway and boundedness.
    """
    settings = log.config.metrics
    window = summary_headway_window(log)
    counts = trigger_counts(log)
    safety = min_pairwise_distance(log, settings.safety_window)
    try:
        headway = time_headway(log, window).to_dict()
    except MetricsError as e:
        logger.warning(f"Headway not computed: {e}")
        headway = {'window': list(window), 'error': str(e)}

    return {
        'run': {
            'scenario': log.config.scenario.value,
            'strategy': log.config.strategy.value,
            'seed': log.config.seed,
            'vehicles': log.n_vehicles,
            'duration': float(log.config.duration),
            'dt': float(log.config.dt),
            'records': log.n_records,
        },
        'trigger_counts': {
            name: {key: int(v) for key, v in row.items()}
            for name, row in counts.to_dict(orient='index').items()
        },
        'safety': safety.to_dict(),
        'headway': headway,
        'boundedness': boundedness_report(log),
    }
