#!/usr/bin/env python3
"""
Formation Simulator CLI

Run a single closed-loop simulation, compare all four control-update
strategies on one scenario, or recompute metrics from a saved run.

Usage:
    python scripts/formation_cli.py run --scenario linear --strategy fixed --seed 7
    python scripts/formation_cli.py compare --scenario square --jobs 4
    python scripts/formation_cli.py metrics runs/linear-fixed-seed0

Exit codes:
    0 success, 2 configuration error, 3 I/O error, 4 aborted run, 5 metrics error
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import pandas as pd
from dotenv import load_dotenv
from loguru import logger
from tqdm import tqdm

from analysis.formation_metrics import MetricsError, summarize
from analysis.log_io import SUMMARY_FILE, read_run, read_summary, write_run, write_summary
from config.logging_config import log_performance, log_run_event, setup_logging
from config.sim_config import ConfigError, SimConfig, apply_overrides, dump_config, parse_config
from simulation.engine import SimulationAborted, run_closed_loop, run_id_for
from utils.event_trigger import StrategyKind
from utils.reference_scenario import ScenarioKind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ABORTED = 4
EXIT_METRICS = 5

STRATEGY_ORDER = [s for s in StrategyKind]


@dataclass
class RunManifest:
    """One CLI invocation: what to do, with which config, and where to write."""
    command: str
    config_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    run_dir: Optional[Path] = None
    overrides: Dict[str, object] = field(default_factory=dict)
    decimate: Optional[int] = None
    jobs: int = 1

    def __post_init__(self):
        if self.command not in ('run', 'compare', 'metrics'):
            raise ValueError(f"unknown command '{self.command}'")
        if self.command == 'metrics' and self.run_dir is None:
            raise ValueError("metrics needs a run directory")
        if self.decimate is not None and self.decimate < 1:
            raise ValueError(f"--decimate must be >= 1, got {self.decimate}")
        if self.jobs < 1:
            raise ValueError(f"--jobs must be >= 1, got {self.jobs}")


def default_output_root() -> Path:
    return Path(os.getenv("FORMATION_OUTPUT_ROOT", "runs"))


def load_config(manifest: RunManifest) -> SimConfig:
    """Parse --config (or the defaults) and apply the command-line overrides."""
    text = ""
    if manifest.config_path is not None:
        text = Path(manifest.config_path).read_text(encoding="utf-8")
    return apply_overrides(parse_config(text), **manifest.overrides)


# =============================================================================
# TABLES
# =============================================================================

def print_run_summary(summary: dict):
    run = summary['run']
    print(f"\n{'='*75}")
    print(f"  FORMATION RUN: {run['scenario']} / {run['strategy']}  "
          f"(seed {run['seed']}, T={run['duration']:g}s, dt={run['dt']:g}s)")
    print(f"{'='*75}")
    print(f"  {'Vehicle':<8} {'Events':>8} {'Relative':>9} {'Fixed':>7} "
          f"{'sup|z1|':>9} {'sup|z2|':>9} {'Headway rng':>12}")
    print(f"  {'-'*68}")

    followers = summary['headway'].get('followers', {})
    sups = summary['boundedness']['sup']
    for name, counts in summary['trigger_counts'].items():
        rng = followers.get(name, {}).get('range')
        rng_text = f"{rng:.4f}s" if rng is not None else "-"
        print(
            f"  {name:<8} {counts['total']:>8d} {counts['relative']:>9d} {counts['fixed']:>7d} "
            f"{sups['z1'][name]:>9.4f} {sups['z2'][name]:>9.4f} {rng_text:>12}"
        )

    safety = summary['safety']
    print(f"  {'-'*68}")
    print(f"  Minimum pairwise distance: {safety['min_distance']:.3f} m")
    verdict = "PASS" if summary['boundedness']['passed'] else "FAIL"
    print(f"  Boundedness: {verdict}")
    for v in summary['boundedness']['violations']:
        print(f"    ! {v}")
    print(f"{'='*75}\n")


def print_comparison(triggers: pd.DataFrame, headways: pd.DataFrame, scenario: str):
    print(f"\n{'='*75}")
    print(f"  STRATEGY COMPARISON: {scenario}")
    print(f"{'='*75}")
    print("  Trigger counts")
    print(f"  {'Vehicle':<8} " + " ".join(f"{s.value:>12}" for s in STRATEGY_ORDER))
    print(f"  {'-'*68}")
    for name, row in triggers.iterrows():
        switched = f"{row['switched']} ({row['switched_relative']}+{row['switched_fixed']})"
        cells = [f"{row[s.value]:>12d}" for s in STRATEGY_ORDER[:-1]] + [f"{switched:>12}"]
        print(f"  {name:<8} " + " ".join(cells))

    if not headways.empty:
        print("\n  Headway range (s)")
        print(f"  {'Vehicle':<8} " + " ".join(f"{s.value:>12}" for s in STRATEGY_ORDER))
        print(f"  {'-'*68}")
        for name, row in headways.iterrows():
            print(f"  {name:<8} " + " ".join(f"{row[s.value]:>12.4f}" for s in STRATEGY_ORDER))
    print(f"{'='*75}\n")


# =============================================================================
# COMMANDS
# =============================================================================

def _run_one(config_text: str, out_dir: str, decimate: Optional[int]) -> dict:
    """Worker for a single strategy; takes plain values so it can cross process boundaries."""
    config = parse_config(config_text)
    log = run_closed_loop(config)
    return write_run(log, Path(out_dir), decimate)


def comparison_tables(summaries: Dict[StrategyKind, dict]):
    """Trigger counts and headway ranges side by side, one column per strategy."""
    triggers = pd.DataFrame({
        s.value: {name: c['total'] for name, c in summaries[s]['trigger_counts'].items()}
        for s in STRATEGY_ORDER
    })
    switched = summaries[StrategyKind.SWITCHED]['trigger_counts']
    triggers['switched_relative'] = pd.Series({name: c['relative'] for name, c in switched.items()})
    triggers['switched_fixed'] = pd.Series({name: c['fixed'] for name, c in switched.items()})
    triggers.index.name = 'vehicle'

    ranges = {}
    for s in STRATEGY_ORDER:
        followers = summaries[s]['headway'].get('followers')
        if followers is not None:
            ranges[s.value] = {name: stats['range'] for name, stats in followers.items()}
    headways = pd.DataFrame(ranges) if len(ranges) == len(STRATEGY_ORDER) else pd.DataFrame()
    headways.index.name = 'vehicle'
    return triggers, headways


def cmd_run(manifest: RunManifest) -> int:
    config = load_config(manifest)
    run_id = run_id_for(config)
    out_dir = manifest.out_dir or default_output_root() / run_id

    log = run_closed_loop(config)
    summary = write_run(log, out_dir, manifest.decimate)
    log_run_event(run_id, "written", out_dir=str(out_dir))
    print_run_summary(summary)
    return EXIT_OK


def cmd_compare(manifest: RunManifest) -> int:
    base = load_config(manifest)
    root = manifest.out_dir or default_output_root() / f"compare-{base.scenario.value}-seed{base.seed}"
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    jobs = {}
    for strategy in STRATEGY_ORDER:
        config = apply_overrides(base, strategy=strategy)
        jobs[strategy] = (dump_config(config), str(root / strategy.value), manifest.decimate)

    summaries: Dict[StrategyKind, dict] = {}
    if manifest.jobs > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            futures = {s: pool.submit(_run_one, *args) for s, args in jobs.items()}
            for s in tqdm(STRATEGY_ORDER, desc="strategies"):
                summaries[s] = futures[s].result()
    else:
        for s in tqdm(STRATEGY_ORDER, desc="strategies"):
            summaries[s] = _run_one(*jobs[s])

    triggers, headways = comparison_tables(summaries)
    triggers.to_csv(root / "trigger_comparison.csv")
    headways.to_csv(root / "headway_comparison.csv")
    log_run_event(f"compare-{base.scenario.value}-seed{base.seed}", "written", out_dir=str(root))
    print_comparison(triggers, headways, base.scenario.value)
    return EXIT_OK


def cmd_metrics(manifest: RunManifest) -> int:
    run_dir = Path(manifest.run_dir)
    log = read_run(run_dir)
    summary = summarize(log)

    stored_path = run_dir / SUMMARY_FILE
    if stored_path.exists() and read_summary(stored_path) != summary:
        logger.warning(f"Recomputed metrics differ from {stored_path}")

    out_dir = Path(manifest.out_dir) if manifest.out_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary(summary, out_dir / SUMMARY_FILE)
    print_run_summary(summary)
    return EXIT_OK


COMMANDS = {'run': cmd_run, 'compare': cmd_compare, 'metrics': cmd_metrics}


def run_command(manifest: RunManifest) -> int:
    """
    Execute a manifest and map failures onto exit codes.

    Returns:
        0 on success; 2 config, 3 I/O, 4 aborted run, 5 metrics error
    """
    started = time.perf_counter()
    try:
        status = COMMANDS[manifest.command](manifest)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        status = EXIT_CONFIG
    except MetricsError as e:
        logger.error(f"Metrics error: {e}")
        status = EXIT_METRICS
    except SimulationAborted as e:
        logger.error(f"Run aborted: {e}")
        status = EXIT_ABORTED
    except OSError as e:
        logger.error(f"I/O error: {e}")
        status = EXIT_IO
    log_performance(f"cli:{manifest.command}", (time.perf_counter() - started) * 1000,
                    success=status == EXIT_OK)
    return status


# =============================================================================
# ARGUMENTS
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Event-triggered formation control simulator')
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='YAML config document (default: built-in defaults)')
    common.add_argument('--out', type=Path, help='Output directory (default: $FORMATION_OUTPUT_ROOT/<run>)')
    common.add_argument('--scenario', choices=[k.value for k in ScenarioKind])
    common.add_argument('--seed', type=int)
    common.add_argument('--dt', type=float, help='Integrator step, s')
    common.add_argument('--duration', type=float, help='Simulated horizon, s')
    common.add_argument('--decimate', type=int, help='Also write every K-th record to a plotting log')
    common.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING, ERROR')
    common.add_argument('--no-log-file', action='store_true', help='Log to the console only')

    run = sub.add_parser('run', parents=[common], help='Run one simulation')
    run.add_argument('--strategy', choices=[k.value for k in StrategyKind])

    compare = sub.add_parser('compare', parents=[common], help='Run all four strategies')
    compare.add_argument('--jobs', type=int, default=1, help='Parallel worker processes')

    metrics = sub.add_parser('metrics', help='Recompute metrics from a run directory')
    metrics.add_argument('run_dir', type=Path)
    metrics.add_argument('--out', type=Path, help='Where to write the summary (default: the run directory)')
    metrics.add_argument('--log-level', default=None)
    metrics.add_argument('--no-log-file', action='store_true')
    return parser


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    overrides = {}
    for key in ('scenario', 'strategy', 'seed', 'dt', 'duration'):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return RunManifest(
        command=args.command,
        config_path=getattr(args, 'config', None),
        out_dir=getattr(args, 'out', None),
        run_dir=getattr(args, 'run_dir', None),
        overrides=overrides,
        decimate=getattr(args, 'decimate', None),
        jobs=getattr(args, 'jobs', 1),
    )


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level, enable_file_logging=not args.no_log_file)
    try:
        manifest = manifest_from_args(args)
    except ValueError as e:
        parser.error(str(e))
    return run_command(manifest)


if __name__ == '__main__':
    sys.exit(main())
