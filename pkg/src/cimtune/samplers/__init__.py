"""Ask/tell samplers and per-parameter portfolio assignment."""
from __future__ import annotations

from dataclasses import dataclass, field

from .base import (
    ParamRange,
    ProtocolError,
    Sampler,
    SamplerKind,
    SearchSpace,
    TrialRecord,
    best_of,
    sort_key,
)
from .cmaes import CMAESSampler
from .gp import GPSampler
from .grid import GridSampler, grid_points
from .random_search import RandomSampler
from .tpe import TPESampler

SAMPLER_CLASSES = {
    SamplerKind.RANDOM: RandomSampler,
    SamplerKind.GRID: GridSampler,
    SamplerKind.TPE: TPESampler,
    SamplerKind.GP: GPSampler,
    SamplerKind.CMAES: CMAESSampler,
}


def make_sampler(kind, space: SearchSpace, seed: int, budget_hint: int = 1,
                 stage_label: str = "", **options) -> Sampler:
    return SAMPLER_CLASSES[SamplerKind(kind)](space, seed, budget_hint, stage_label, **options)


@dataclass(frozen=True)
class PortfolioAssignment:
    """Which sampler tunes which parameter; unmapped names use ``default_kind``."""

    default_kind: SamplerKind = SamplerKind.TPE
    mapping: dict[str, SamplerKind] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "default_kind", SamplerKind(self.default_kind))
        object.__setattr__(self, "mapping", {k: SamplerKind(v) for k, v in self.mapping.items()})

    @classmethod
    def uniform(cls, kind) -> "PortfolioAssignment":
        return cls(SamplerKind(kind))

    def validate(self, names) -> None:
        unknown = set(self.mapping) - set(names)
        if unknown:
            raise ValueError(f"assignment names unknown parameters: {sorted(unknown)}")

    def kind_for(self, name: str) -> SamplerKind:
        return self.mapping.get(name, self.default_kind)

    def to_dict(self) -> dict:
        return {"default": self.default_kind.value,
                "mapping": {k: v.value for k, v in self.mapping.items()}}


__all__ = [
    "ParamRange", "SearchSpace", "TrialRecord", "SamplerKind", "Sampler", "ProtocolError",
    "PortfolioAssignment", "make_sampler", "grid_points", "best_of", "sort_key",
    "RandomSampler", "GridSampler", "TPESampler", "GPSampler", "CMAESSampler",
]
