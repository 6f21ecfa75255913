"""Reproducible, splittable random streams."""
from typing import Tuple

import numpy as np

from exceptions import InvalidArgumentError

_SEED_LIMIT = 2 ** 64


class SeededRng:
    """
    Deterministic random generator addressed by (seed, spawn key).

    Child streams are derived from the master seed and a counter path, so
    replicate k can be regenerated without replaying replicates 0..k-1.
    """

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        """
        Initialize a stream.

        Args:
            seed: Master 64-bit unsigned seed
            spawn_key: Counter path below the master seed

        Raises:
            InvalidArgumentError: If the seed is outside [0, 2**64)
        """
        if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < _SEED_LIMIT:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, k: int) -> "SeededRng":
        """Child stream number k, independent of this stream's draw history."""
        if k < 0:
            raise InvalidArgumentError(f"stream index must be nonnegative, got {k}")
        return SeededRng(self.seed, self.spawn_key + (k,))

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def unit_ball(self, count: int, dim: int, radius: float = 1.0) -> np.ndarray:
        """Points drawn uniformly from the radius-ball in R^dim."""
        directions = self.standard_normal((count, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius * self.generator.uniform(0.0, 1.0, count) ** (1.0 / dim)
        return directions * radii[:, None]

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, spawn_key={self.spawn_key})"
