"""Parsing of `start:stop:count:lin|log` grid strings."""
from typing import List

import numpy as np

from exceptions import ValidationError


class GridParser:
    """Turns command-line grid strings into sorted float lists."""

    SCALES = ("lin", "log")

    @staticmethod
    def parse(text: str) -> List[float]:
        """
        Parse a grid string.

        Accepts `start:stop:count:lin|log`, or a comma-separated list of values.

        Args:
            text: Grid string

        Returns:
            Ascending list of distinct grid values

        Raises:
            ValidationError: If the string is malformed
        """
        if text is None or not text.strip():
            raise ValidationError("grid string must not be empty")
        text = text.strip()

        if ":" not in text:
            return GridParser.parse_list(text)

        parts = text.split(":")
        if len(parts) != 4:
            raise ValidationError(f"grid must look like start:stop:count:lin|log, got {text!r}")
        start_s, stop_s, count_s, scale = parts
        try:
            start, stop, count = float(start_s), float(stop_s), int(count_s)
        except ValueError:
            raise ValidationError(f"grid bounds and count must be numeric, got {text!r}")

        if scale not in GridParser.SCALES:
            raise ValidationError(f"grid scale must be 'lin' or 'log', got {scale!r}")
        if count < 1:
            raise ValidationError(f"grid count must be at least 1, got {count}")
        if count == 1 and start != stop:
            raise ValidationError("a one-point grid needs start == stop")
        if stop < start:
            raise ValidationError(f"grid stop {stop} is below start {start}")

        if scale == "log":
            if start <= 0:
                raise ValidationError(f"log grid needs positive bounds, got {start}")
            values = np.geomspace(start, stop, count)
        else:
            values = np.linspace(start, stop, count)
        return sorted({float(v) for v in values})

    @staticmethod
    def parse_list(text: str) -> List[float]:
        """Parse `a,b,c` into an ascending list of distinct floats."""
        try:
            values = [float(tok) for tok in text.split(",") if tok.strip()]
        except ValueError:
            raise ValidationError(f"grid values must be numeric, got {text!r}")
        if not values:
            raise ValidationError("grid string must not be empty")
        return sorted(set(values))
