"""
Logging Configuration

Sets up structured logging for the simulator and its command-line tools.
"""

import os
import sys
from pathlib import Path

from loguru import logger

DEFAULT_LOG_DIR = Path(__file__).parent.parent / "logs"
LOG_ROTATION = "10 MB"
LOG_RETENTION = 5


def setup_logging(
    log_dir: Path = None,
    level: str = None,
    enable_file_logging: bool = True
):
    """
    Configure logging for the application

    Args:
        log_dir: Directory to store log files (env FORMATION_LOG_DIR, else ./logs)
        level: Logging level (env FORMATION_LOG_LEVEL, else INFO)
        enable_file_logging: Whether to write logs to files
    """
    if level is None:
        level = os.getenv("FORMATION_LOG_LEVEL", "INFO")
    level = level.upper()

    logger.remove()

    # Console on stderr; stdout carries the CLI tables
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        level=level,
        colorize=True
    )

    if enable_file_logging:
        if log_dir is None:
            log_dir = Path(os.getenv("FORMATION_LOG_DIR", DEFAULT_LOG_DIR))

        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        # compare workers write to the same files
        logger.add(
            log_dir / "formation.log",
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {process} | {name}:{function}:{line} - {message}",
            level=level,
            rotation=LOG_ROTATION,
            retention=LOG_RETENTION,
            enqueue=True
        )

        logger.add(
            log_dir / "errors.log",
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}\n{exception}",
            level="ERROR",
            rotation=LOG_ROTATION,
            retention=LOG_RETENTION,
            enqueue=True
        )

        # One line per run lifecycle event: start, finish, abort, output location
        logger.add(
            log_dir / "runs.log",
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {extra[run]} | {message}",
            level="INFO",
            rotation=LOG_ROTATION,
            retention=LOG_RETENTION,
            enqueue=True,
            filter=lambda record: "run" in record["extra"]
        )

        logger.add(
            log_dir / "performance.log",
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {extra[operation]} | {message}",
            level="DEBUG",
            rotation=LOG_ROTATION,
            retention=2,
            enqueue=True,
            filter=lambda record: "operation" in record["extra"]
        )

    return logger


def log_run_event(run_id: str, event: str, **fields):
    """Log a run lifecycle event with key=value fields"""

    message = f"Event: {event}"
    for key, value in fields.items():
        if isinstance(value, float):
            message += f" | {key}: {value:.6g}"
        else:
            message += f" | {key}: {value}"

    logger.bind(run=run_id).info(message)


def log_performance(operation: str, duration_ms: float, success: bool = True):
    """Log performance metrics"""

    status = "SUCCESS" if success else "FAILED"
    logger.bind(operation=operation).debug(
        f"{status} | Duration: {duration_ms:.2f}ms"
    )
