"""Seeded probe-point generation for pointwise identity checks."""

from __future__ import annotations

import numpy as np


def sample_points(dimension: int, count: int, seed: int) -> list[tuple[float, ...]]:
    """Uniform points in [-1, 1]^dimension from a seeded generator."""
    rng = np.random.default_rng(seed)
    grid = rng.uniform(-1.0, 1.0, (count, dimension))
    return [tuple(float(v) for v in row) for row in grid]
