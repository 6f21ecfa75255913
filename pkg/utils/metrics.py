"""Timing and replicate statistics."""
import time
from functools import wraps
from typing import Any, Callable, Tuple

import numpy as np

from logger import setup_logger

logger = setup_logger(__name__)


class PerformanceMonitor:
    """Simple wall-clock monitoring for long-running computations."""

    @staticmethod
    def time_function(func: Callable) -> Callable:
        """Decorator to time function execution."""

        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                elapsed = time.perf_counter() - start_time
                logger.info(f"{func.__name__} completed in {elapsed:.2f}s")
                return result
            except Exception as e:
                elapsed = time.perf_counter() - start_time
                logger.error(f"{func.__name__} failed after {elapsed:.2f}s: {e}")
                raise

        return wrapper


class ReplicateStats:
    """Deterministic aggregation of per-replicate values."""

    @staticmethod
    def mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
        """
        Mean and standard error of replicate values in replicate order.

        numpy's pairwise summation fixes the reduction tree, so the result
        does not depend on which worker produced which value.

        Args:
            values: One value per replicate

        Returns:
            (mean, standard error); the error is 0 for a single replicate
        """
        values = np.asarray(values, dtype=float)
        mean = float(np.mean(values))
        if values.size < 2:
            return mean, 0.0
        return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))

    @staticmethod
    def relative_gap(measured: float, reference: float) -> float:
        """|measured - reference| / |reference|, with an absolute gap at reference 0."""
        if reference == 0:
            return abs(measured)
        return abs(measured - reference) / abs(reference)
