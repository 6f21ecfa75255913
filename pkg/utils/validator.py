"""Argument and precondition validation utilities."""
import math
from typing import Iterable, List, Tuple

import numpy as np

from exceptions import DomainError, InvalidArgumentError
from logger import setup_logger
from models import AsymptoticConfig

logger = setup_logger(__name__)


class Validator:
    """Handles argument validation for the services."""

    @staticmethod
    def validate_positive(name: str, value: float) -> float:
        """
        Validate that a scalar is a finite positive real.

        Args:
            name: Argument name used in the message
            value: Value to check

        Returns:
            The value as float

        Raises:
            InvalidArgumentError: If the value is not finite and positive
        """
        value = float(value)
        if not math.isfinite(value) or value <= 0:
            raise InvalidArgumentError(f"{name} must be positive, got {value}")
        return value

    @staticmethod
    def validate_nonnegative(name: str, value: float) -> float:
        """
        Validate that a scalar is a finite nonnegative real.

        Raises:
            InvalidArgumentError: If the value is negative or not finite
        """
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise InvalidArgumentError(f"{name} must be nonnegative, got {value}")
        return value

    @staticmethod
    def validate_count(name: str, value: int, minimum: int = 1) -> int:
        if int(value) != value or value < minimum:
            raise InvalidArgumentError(f"{name} must be an integer >= {minimum}, got {value}")
        return int(value)

    @staticmethod
    def validate_vector_pair(first: np.ndarray, second: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Validate that two parameter vectors are 1-D and of equal length.

        Args:
            first: Estimate
            second: Reference vector

        Returns:
            Both inputs as float arrays

        Raises:
            InvalidArgumentError: On shape mismatch
        """
        a = np.asarray(first, dtype=float)
        b = np.asarray(second, dtype=float)
        if a.ndim != 1 or b.ndim != 1:
            raise InvalidArgumentError(f"expected vectors, got shapes {a.shape} and {b.shape}")
        if a.shape != b.shape:
            raise InvalidArgumentError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
        return a, b

    @staticmethod
    def validate_grid(name: str, values: Iterable[float], strictly_positive: bool = False) -> List[float]:
        """
        Validate a nonempty grid of nonnegative (or positive) reals.

        Raises:
            InvalidArgumentError: If the grid is empty or has an invalid entry
        """
        grid = [float(v) for v in values]
        if not grid:
            raise InvalidArgumentError(f"{name} grid must be nonempty")
        check = Validator.validate_positive if strictly_positive else Validator.validate_nonnegative
        for v in grid:
            check(name, v)
        return grid

    @staticmethod
    def validate_saddle_config(cfg: AsymptoticConfig) -> None:
        """
        Validate that the saddle characterization applies to cfg.

        Raises:
            DomainError: If eps_train = 0 and delta <= 1
        """
        if not cfg.has_asymptotic_prediction:
            raise DomainError(
                f"eps_train = 0 requires delta > 1 for asymptotic predictions, got delta={cfg.delta}"
            )
