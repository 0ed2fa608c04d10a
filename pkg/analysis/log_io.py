"""
Run Serialization

State-log CSV (one row per vehicle per step), metrics summary JSON and the
per-metric CSV tables of a run directory. Floats are written at full
precision and read back with round-trip parsing, so metrics recomputed from a
reloaded log match the ones written during the run exactly.
"""

import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
from loguru import logger

from analysis.formation_metrics import (
    MetricsError,
    boundedness_table,
    min_pairwise_distance,
    summarize,
    summary_headway_window,
    time_headway,
    trigger_counts,
)
from config.sim_config import SimConfig, dump_config, parse_config
from simulation.sim_log import SimLog

LOG_SCHEMA_VERSION = 1

# (csv columns, SimLog array) in column order
_PAIR_COLUMNS = (
    (('x', 'y'), 'position'),
    (('vx', 'vy'), 'velocity'),
    (('xhat', 'yhat'), 'position_estimate'),
    (('vxhat', 'vyhat'), 'velocity_estimate'),
    (('ref_x', 'ref_y'), 'reference_position'),
    (('z1x', 'z1y'), 'z1'),
    (('z2x', 'z2y'), 'z2'),
    (('mu_x', 'mu_y'), 'mu'),
    (('u_x', 'u_y'), 'u'),
)
_EXTRA_PAIR = (('w_x', 'w_y'), 'w')

STATE_LOG_COLUMNS = (
    ['t', 'vehicle_id']
    + [c for cols, _ in _PAIR_COLUMNS for c in cols]
    + ['triggered', 'strategy_branch']
    + list(_EXTRA_PAIR[0])
    + ['w_hat_norm', 'sigma_hat_norm']
)

CONFIG_FILE = "config.yaml"
STATE_LOG_FILE = "state_log.csv"
DECIMATED_LOG_FILE = "state_log_decimated.csv"
SUMMARY_FILE = "metrics_summary.json"


# =============================================================================
# STATE LOG
# =============================================================================

def log_to_frame(log: SimLog, decimate: int = 1) -> pd.DataFrame:
    """
    Long-format state log, ordered by time then vehicle.

    Args:
        log: Simulation log
        decimate: Keep every k-th record (1 keeps all)
    """
    if decimate < 1:
        raise ValueError(f"decimate must be >= 1, got {decimate}")
    steps = np.arange(0, log.n_records, decimate)
    k, n = steps.size, log.n_vehicles

    data = {
        't': np.repeat(log.time[steps], n),
        'vehicle_id': np.tile(np.arange(1, n + 1), k),
    }
    for (cx, cy), name in _PAIR_COLUMNS + (_EXTRA_PAIR,):
        values = getattr(log, name)[steps].reshape(k * n, 2)
        data[cx] = values[:, 0]
        data[cy] = values[:, 1]
    data['triggered'] = log.triggered[steps].reshape(-1).astype(int)
    data['strategy_branch'] = log.branch[steps].reshape(-1).astype(int)
    data['w_hat_norm'] = log.w_hat_norm[steps].reshape(-1)
    data['sigma_hat_norm'] = log.sigma_hat_norm[steps].reshape(-1)
    return pd.DataFrame(data, columns=STATE_LOG_COLUMNS)


def frame_to_log(df: pd.DataFrame, config: SimConfig) -> SimLog:
    """
    Rebuild a SimLog from a full-resolution state-log frame.

    Raises:
        MetricsError: column set differs from the schema or rows are not a
                      complete vehicle-major grid
    """
    if list(df.columns) != STATE_LOG_COLUMNS:
        raise MetricsError(
            f"state log columns do not match schema v{LOG_SCHEMA_VERSION}: {list(df.columns)}"
        )
    n = config.vehicles
    if len(df) == 0 or len(df) % n:
        raise MetricsError(f"state log has {len(df)} rows, not a multiple of {n} vehicles")
    k = len(df) // n
    ids = df['vehicle_id'].to_numpy().reshape(k, n)
    if not (ids == np.arange(1, n + 1)).all():
        raise MetricsError("state log rows are not ordered by time then vehicle_id")

    arrays = {}
    for (cx, cy), name in _PAIR_COLUMNS + (_EXTRA_PAIR,):
        arrays[name] = np.stack([df[cx].to_numpy(), df[cy].to_numpy()], axis=-1).reshape(k, n, 2)
    arrays['triggered'] = df['triggered'].to_numpy().reshape(k, n).astype(bool)
    arrays['branch'] = df['strategy_branch'].to_numpy().reshape(k, n).astype(np.int8)
    arrays['w_hat_norm'] = df['w_hat_norm'].to_numpy().reshape(k, n)
    arrays['sigma_hat_norm'] = df['sigma_hat_norm'].to_numpy().reshape(k, n)
    time = df['t'].to_numpy().reshape(k, n)[:, 0]
    return SimLog.from_arrays(config, time, **arrays)


def read_state_log(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


# =============================================================================
# RUN DIRECTORY
# =============================================================================

def write_summary(summary: dict, path: Path):
    path.write_text(json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_summary(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_metric_tables(log: SimLog, summary: dict, out_dir: Path) -> Dict[str, Path]:
    """trigger_counts.csv, safety.csv, headway.csv and boundedness.csv."""
    settings = log.config.metrics
    paths = {
        'trigger_counts': out_dir / "trigger_counts.csv",
        'safety': out_dir / "safety.csv",
        'headway': out_dir / "headway.csv",
        'boundedness': out_dir / "boundedness.csv",
    }
    trigger_counts(log).to_csv(paths['trigger_counts'])
    min_pairwise_distance(log, settings.safety_window).pairs.to_csv(paths['safety'], index=False)
    if 'error' in summary['headway']:
        pd.DataFrame(columns=['vehicle', 'max', 'min', 'range', 'mean', 'excluded']).to_csv(
            paths['headway'], index=False
        )
    else:
        time_headway(log, summary_headway_window(log)).stats.to_csv(paths['headway'])
    boundedness_table(summary['boundedness']).to_csv(paths['boundedness'])
    return paths


def write_run(log: SimLog, out_dir: Path, decimate: Optional[int] = None) -> dict:
    """
    Write every artifact of a run into out_dir.

    Args:
        log: Simulation log
        out_dir: Run directory (created if missing)
        decimate: Also write a decimated plotting log when > 1

    Returns:
        The metrics summary that was written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    (out_dir / CONFIG_FILE).write_text(dump_config(log.config), encoding="utf-8")
    log_to_frame(log).to_csv(out_dir / STATE_LOG_FILE, index=False)
    if decimate is not None and decimate > 1:
        log_to_frame(log, decimate).to_csv(out_dir / DECIMATED_LOG_FILE, index=False)

    summary = summarize(log)
    write_summary(summary, out_dir / SUMMARY_FILE)
    write_metric_tables(log, summary, out_dir)
    logger.info(f"Wrote run artifacts to {out_dir}")
    return summary


def read_run(run_dir: Path) -> SimLog:
    """
    Reload a run directory written by write_run.

    Raises:
        ConfigError: config.yaml does not validate
        MetricsError: missing or malformed state log
        OSError: files cannot be read
    """
    run_dir = Path(run_dir)
    config = parse_config((run_dir / CONFIG_FILE).read_text(encoding="utf-8"))
    path = run_dir / STATE_LOG_FILE
    if not path.exists():
        raise MetricsError(f"no {STATE_LOG_FILE} in {run_dir}")
    try:
        df = read_state_log(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MetricsError(f"cannot parse {path}: {e}") from e
    return frame_to_log(df, config)

