from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..seeding import rng_from_seed


class ProtocolError(RuntimeError):
    """Raised when the ask/tell protocol is violated."""


class SamplerKind(str, Enum):
    RANDOM = "random"
    GRID = "grid"
    TPE = "tpe"
    GP = "gp"
    CMAES = "cmaes"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ParamRange:
    name: str
    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ValueError(f"bounds of {self.name!r} must be finite")
        if not self.low < self.high:
            raise ValueError(f"empty range for {self.name!r}: [{self.low}, {self.high}]")

    @property
    def width(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class SearchSpace:
    ranges: tuple[ParamRange, ...]

    def __post_init__(self):
        ranges = tuple(self.ranges)
        if not ranges:
            raise ValueError("search space needs at least one dimension")
        names = [r.name for r in ranges]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        object.__setattr__(self, "ranges", ranges)

    @classmethod
    def from_bounds(cls, bounds: dict[str, tuple[float, float]]) -> "SearchSpace":
        return cls(tuple(ParamRange(k, float(lo), float(hi)) for k, (lo, hi) in bounds.items()))

    @property
    def dim(self) -> int:
        return len(self.ranges)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.ranges]

    @property
    def low(self) -> np.ndarray:
        return np.array([r.low for r in self.ranges])

    @property
    def high(self) -> np.ndarray:
        return np.array([r.high for r in self.ranges])

    def subspace(self, names: Sequence[str]) -> "SearchSpace":
        by_name = {r.name: r for r in self.ranges}
        return SearchSpace(tuple(by_name[n] for n in names))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return p.shape == (self.dim,) and bool(np.all(p >= self.low) and np.all(p <= self.high))

    def to_unit(self, point) -> np.ndarray:
        return (np.asarray(point, dtype=float) - self.low) / (self.high - self.low)

    def from_unit(self, u) -> np.ndarray:
        x = self.low + np.asarray(u, dtype=float) * (self.high - self.low)
        return np.clip(x, self.low, self.high)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    point: tuple[float, ...]
    value: float
    sampler: SamplerKind
    stage_label: str = ""
    bootstrap: bool = False


def sort_key(value: float) -> tuple[int, float]:
    """Ordering where +inf (and nan) rank after every finite value."""
    if math.isfinite(value):
        return (0, value)
    return (1, 0.0)


def best_of(history: Sequence[TrialRecord]) -> TrialRecord:
    """Record with the smallest value; ties go to the lowest trial_id."""
    if not history:
        raise ProtocolError("best_of needs a non-empty history")
    return min(history, key=lambda r: (sort_key(r.value), r.trial_id))


class Sampler:
    """Ask/tell search over a box.  Subclasses implement ``_propose``.

    Values are minimized; ``+inf`` is accepted and ranks below every
    finite value.  Observations that were not asked for (e.g. a known good
    starting point) go through ``tell(..., bootstrap=True)``.
    """

    kind: SamplerKind

    def __init__(self, space: SearchSpace, seed: int, budget_hint: int = 1, stage_label: str = ""):
        if budget_hint < 1:
            raise ValueError("budget_hint must be >= 1")
        self.space = space
        self.seed = seed
        self.budget_hint = budget_hint
        self.stage_label = stage_label
        self.rng = rng_from_seed(seed)
        self.history: list[TrialRecord] = []
        self._pending: np.ndarray | None = None

    def ask(self) -> np.ndarray:
        if self._pending is not None:
            raise ProtocolError("ask called twice without an intervening tell")
        point = np.clip(np.asarray(self._propose(), dtype=float), self.space.low, self.space.high)
        self._pending = point
        return point.copy()

    def tell(self, point, value: float, bootstrap: bool = False) -> None:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape != (self.space.dim,) or not np.all(np.isfinite(p)):
            raise ValueError(f"point must be a finite vector of length {self.space.dim}")
        value = float(value)
        if math.isnan(value) or value == -math.inf:
            raise ValueError(f"value must be finite or +inf, got {value}")
        if bootstrap:
            if not self.space.contains(p):
                raise ValueError("bootstrap point outside the search space")
        else:
            if self._pending is None:
                raise ProtocolError("tell without a pending ask (use bootstrap=True)")
            if not np.array_equal(p, self._pending):
                raise ProtocolError("told point differs from the pending ask")
            self._pending = None
        record = TrialRecord(len(self.history), tuple(p.tolist()), value, self.kind,
                             self.stage_label, bootstrap)
        self.history.append(record)
        self._observe(record)

    def best(self) -> TrialRecord:
        return best_of(self.history)

    def _uniform(self) -> np.ndarray:
        return self.rng.uniform(self.space.low, self.space.high)

    def _propose(self) -> np.ndarray:
        raise NotImplementedError

    def _observe(self, record: TrialRecord) -> None:
        pass

    def _observations(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([r.point for r in self.history], dtype=float).reshape(-1, self.space.dim)
        y = np.array([r.value for r in self.history], dtype=float)
        return x, y
