"""(mu/mu_w, lambda)-CMA-ES in the unit cube with clipping to the box."""
from __future__ import annotations

import math

import numpy as np

from .base import Sampler, SamplerKind, sort_key

INITIAL_SIGMA = 0.3  # fraction of each range
MIN_SIGMA = 1e-12


class CMAESSampler(Sampler):
    kind = SamplerKind.CMAES

    def __init__(self, space, seed, budget_hint=1, stage_label=""):
        super().__init__(space, seed, budget_hint, stage_label)
        n = space.dim
        self.lam = 4 + int(math.floor(3 * math.log(n)))
        self.mu = self.lam // 2
        w = math.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / float(np.sum(self.weights**2))
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1, 2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean: np.ndarray | None = None
        self.sigma = INITIAL_SIGMA
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.generation = 0
        self._queue: list[np.ndarray] = []
        self._told: list[tuple[np.ndarray, float]] = []

    def _start(self):
        finite = [r for r in self.history if math.isfinite(r.value)]
        if finite:
            best = min(finite, key=lambda r: (r.value, r.trial_id))
            self.mean = self.space.to_unit(best.point)
        else:
            self.mean = np.full(self.space.dim, 0.5)

    def _sample_generation(self):
        if self.mean is None:
            self._start()
        z = self.rng.standard_normal((self.lam, self.space.dim))
        y = (z * self.D) @ self.B.T
        u = np.clip(self.mean + self.sigma * y, 0.0, 1.0)
        self._queue = list(u)

    def _propose(self):
        if not self._queue:
            self._sample_generation()
        return self.space.from_unit(self._queue.pop(0))

    def _observe(self, record):
        if record.bootstrap:
            return
        self._told.append((self.space.to_unit(record.point), record.value))
        if len(self._told) == self.lam:
            self._update()
            self._told = []

    def _update(self):
        n = self.space.dim
        ranked = sorted(range(self.lam), key=lambda i: (sort_key(self._told[i][1]), i))
        xs = np.array([self._told[i][0] for i in ranked[: self.mu]])
        old = self.mean
        self.mean = self.weights @ xs
        y = (xs - old) / self.sigma
        y_w = (self.mean - old) / self.sigma
        inv_sqrt_c = self.B @ np.diag(1 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (inv_sqrt_c @ y_w)
        self.generation += 1
        hsig = (np.linalg.norm(self.ps) / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation))
                < (1.4 + 2 / (n + 1)) * self.chi_n)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y_w
        rank_mu = (y.T * self.weights) @ y
        self.C = ((1 - self.c1 - self.cmu) * self.C
                  + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
                  + self.cmu * rank_mu)
        self.sigma *= math.exp((self.cs / self.damps) * (np.linalg.norm(self.ps) / self.chi_n - 1))
        self.sigma = min(max(self.sigma, MIN_SIGMA), 1.0)
        self.C = 0.5 * (self.C + self.C.T)
        evals, vecs = np.linalg.eigh(self.C)
        if not np.all(np.isfinite(evals)) or evals.min() <= 0:
            self.C, self.B, self.D = np.eye(n), np.eye(n), np.ones(n)
            self.ps[:] = 0.0
            self.pc[:] = 0.0
            return
        self.B, self.D = vecs, np.sqrt(evals)
