"""Tree-structured Parzen estimator with independent dimensions."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .base import Sampler, SamplerKind, sort_key

N_STARTUP = 10
GAMMA = 0.25
N_CANDIDATES = 24


class ParzenEstimator1D:
    """Mixture of Gaussians truncated to [low, high].

    One kernel per observation with bandwidth equal to the larger gap to
    its sorted neighbours (the box bounds stand in for missing neighbours
    at the edges), plus a broad prior kernel centred in the box.
    """

    def __init__(self, obs: np.ndarray, low: float, high: float):
        width = high - low
        mus = np.sort(np.asarray(obs, dtype=float))
        if mus.size:
            padded = np.concatenate(([low], mus, [high]))
            sigmas = np.maximum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
            min_sigma = width / min(100.0, 1.0 + mus.size)
            sigmas = np.clip(sigmas, min_sigma, width)
        else:
            sigmas = np.empty(0)
        self.mus = np.concatenate((mus, [0.5 * (low + high)]))
        self.sigmas = np.concatenate((sigmas, [width]))
        self.weights = np.full(self.mus.size, 1.0 / self.mus.size)
        self.low, self.high = low, high
        a = (low - self.mus) / self.sigmas
        b = (high - self.mus) / self.sigmas
        self._mass = ndtr(b) - ndtr(a)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comps = rng.choice(self.mus.size, size=size, p=self.weights)
        out = np.empty(size)
        for i, c in enumerate(comps):
            while True:
                v = rng.normal(self.mus[c], self.sigmas[c])
                if self.low <= v <= self.high:
                    out[i] = v
                    break
        return out

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[:, None]
        z = (x - self.mus) / self.sigmas
        dens = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigmas * self._mass)
        return np.log(np.maximum(dens @ self.weights, 1e-300))


class TPESampler(Sampler):
    kind = SamplerKind.TPE

    def __init__(self, space, seed, budget_hint=1, stage_label="", n_startup=N_STARTUP):
        super().__init__(space, seed, budget_hint, stage_label)
        self.n_startup = n_startup

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the good and bad partitions of the history."""
        order = sorted(range(len(self.history)),
                       key=lambda i: (sort_key(self.history[i].value), i))
        n_finite = sum(math.isfinite(r.value) for r in self.history)
        n_good = min(math.ceil(GAMMA * len(self.history)), n_finite)
        return np.array(order[:n_good], dtype=int), np.array(order[n_good:], dtype=int)

    def _propose(self):
        if len(self.history) < self.n_startup:
            return self._uniform()
        x, _ = self._observations()
        good, bad = self.split()
        score = np.zeros(N_CANDIDATES)
        cands = np.empty((N_CANDIDATES, self.space.dim))
        for d, r in enumerate(self.space.ranges):
            l_est = ParzenEstimator1D(x[good, d], r.low, r.high)
            g_est = ParzenEstimator1D(x[bad, d], r.low, r.high)
            cands[:, d] = l_est.sample(self.rng, N_CANDIDATES)
            score += l_est.log_pdf(cands[:, d]) - g_est.log_pdf(cands[:, d])
        return cands[int(np.argmax(score))]
