from __future__ import annotations

import itertools

import numpy as np

from .base import Sampler, SamplerKind, SearchSpace


def points_per_dim(budget: int, dim: int) -> int:
    """Smallest k with k**dim >= budget (exact integer arithmetic)."""
    k = max(1, int(round(budget ** (1.0 / dim))))
    while k**dim < budget:
        k += 1
    while k > 1 and (k - 1) ** dim >= budget:
        k -= 1
    return k


def axis_values(low: float, high: float, k: int) -> np.ndarray:
    if k == 1:
        return np.array([0.5 * (low + high)])
    return np.linspace(low, high, k)


def grid_points(space: SearchSpace, budget: int) -> list[np.ndarray]:
    """Lexicographic lattice (first dimension slowest), truncated to ``budget``."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    k = points_per_dim(budget, space.dim)
    axes = [axis_values(r.low, r.high, k) for r in space.ranges]
    lattice = itertools.islice(itertools.product(*axes), budget)
    return [np.array(p) for p in lattice]


class GridSampler(Sampler):
    """Walks the lattice; once exhausted it revisits it with +-half-cell jitter."""

    kind = SamplerKind.GRID

    def __init__(self, space, seed, budget_hint=1, stage_label=""):
        super().__init__(space, seed, budget_hint, stage_label)
        self.points = grid_points(space, budget_hint)
        k = points_per_dim(budget_hint, space.dim)
        self._half_cell = (space.high - space.low) / (2 * max(k - 1, 1))
        self._cursor = 0

    def _propose(self):
        i, self._cursor = self._cursor, self._cursor + 1
        base = self.points[i % len(self.points)]
        if i < len(self.points):
            return base
        return base + self.rng.uniform(-self._half_cell, self._half_cell)
