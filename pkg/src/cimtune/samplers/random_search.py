from __future__ import annotations

from .base import Sampler, SamplerKind


class RandomSampler(Sampler):
    kind = SamplerKind.RANDOM

    def _propose(self):
        return self._uniform()
