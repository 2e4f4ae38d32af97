"""
Utility functions for qmr.
Timing, seeding and filesystem helpers shared by the services and the CLI.
"""

import os
import time
import uuid
import logging
import functools
from datetime import datetime
from typing import Callable, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)


def generate_run_id() -> str:
    """Generate a run ID in the format YYMMDD-XXXXX for reports."""
    date_part = datetime.now().strftime("%y%m%d")
    random_part = str(uuid.uuid4().int)[-5:]
    return f"{date_part}-{random_part}"


def format_timestamp(dt: Optional[datetime] = None) -> str:
    """Format datetime for logging and reports."""
    if dt is None:
        dt = datetime.now()
    return dt.strftime("%Y-%m-%d %H:%M:%S")


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """Seeded numpy generator; falls back to the configured default seed."""
    if seed is None:
        from ..config import get_config
        seed = get_config().seed
    return np.random.default_rng(seed)


# Performance Monitoring
class Timer:
    """
    Context manager timing one pipeline stage.

    With ``timings`` and ``key`` the elapsed seconds are stored as ``timings[key]``
    on exit, which is how the reduce report collects its per-stage timings.
    """

    def __init__(self, operation_name: str = "Operation", log_level: int = logging.INFO,
                 timings: Optional[Dict[str, float]] = None, key: Optional[str] = None):
        self.operation_name = operation_name
        self.log_level = log_level
        self.timings = timings
        self.key = key
        self._start: Optional[float] = None
        self._stop: Optional[float] = None

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._stop = time.perf_counter()
        if self.timings is not None and self.key:
            self.timings[self.key] = self.elapsed()
        logger.log(self.log_level, f"{self.operation_name} completed in {self.elapsed():.3f}s")

    def elapsed(self) -> float:
        """Seconds since entry, or the stage duration once exited."""
        if self._start is None:
            return 0.0
        return (self._stop or time.perf_counter()) - self._start


def measure_performance(func: Callable) -> Callable:
    """Decorator to measure function performance."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            duration = time.perf_counter() - start_time
            logger.info(f"{func.__name__} executed in {duration:.3f}s")
            return result
        except Exception as e:
            duration = time.perf_counter() - start_time
            logger.error(f"{func.__name__} failed after {duration:.3f}s: {e}")
            raise
    return wrapper


# File and Path Utilities
def ensure_parent_directory(file_path: str) -> str:
    """Create the parent directory of an output file."""
    parent = os.path.dirname(os.path.abspath(file_path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    return file_path
