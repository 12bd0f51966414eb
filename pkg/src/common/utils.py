"""
Utility functions shared across modules.

Logging helpers, timing, and the dB/linear unit conversions used at the
configuration boundary.
"""

import functools
import logging
import time
from typing import Any, Callable, TypeVar

import numpy as np

T = TypeVar('T')

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance for a module."""
    return logging.getLogger(name)


def time_function(func: Callable[..., T]) -> Callable[..., T]:
    """Decorator to measure and log the execution time of a function."""
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> T:
        logger = get_logger(func.__module__)
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed_time = time.perf_counter() - start_time
        logger.debug(f"Function {func.__name__} took {elapsed_time:.4f} seconds to run")
        return result
    return wrapper


def db_to_linear(value_db: Any) -> Any:
    """Convert a power ratio in dB to linear scale."""
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    """Convert a power level in dBm to W."""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def wavelength(carrier_hz: float) -> float:
    """Free-space wavelength in metres."""
    return SPEED_OF_LIGHT / carrier_hz


def format_exact(value: float) -> str:
    """Shortest round-tripping text form of a float, for CSV output."""
    return repr(float(value))
