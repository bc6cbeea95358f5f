"""Utility functions for undernewton."""
import logging

import numpy as np

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator for every random problem and benchmark."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"ERROR: seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def format_float(value: float | None) -> str:
    """Trace formatting: 17 significant digits, empty for missing values."""
    if value is None:
        return ""
    return f"{value:.17g}"
