"""Gaussian-process regression with expected-improvement acquisition."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm, qmc

from .base import Sampler, SamplerKind

N_STARTUP = 5
LENGTH_SCALE = 0.2
NOISE = 1e-6
N_CANDIDATES = 1024


def rbf(a: np.ndarray, b: np.ndarray, length_scale: float = LENGTH_SCALE) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return np.exp(-0.5 * d2 / length_scale**2)


def fill_infinite(y: np.ndarray) -> np.ndarray:
    """Replace +inf by worst finite + 3 std (fit-time only)."""
    finite = np.isfinite(y)
    if finite.all():
        return y.copy()
    std = float(np.std(y[finite])) if finite.sum() > 1 else 0.0
    worst = float(np.max(y[finite]))
    return np.where(finite, y, worst + 3.0 * (std if std > 0 else max(1.0, abs(worst))))


class GaussianProcess:
    """Zero-mean GP on standardized targets over unit-cube inputs."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.y_mean = float(np.mean(y))
        y_std = float(np.std(y))
        self.y_scale = y_std if y_std > 0 else 1.0
        ys = (y - self.y_mean) / self.y_scale
        self.signal = max(float(np.var(ys)), 1e-12)
        self.x = x
        k = self.signal * rbf(x, x) + NOISE * np.eye(len(x))
        self._chol = cho_factor(k, lower=True)
        self._alpha = cho_solve(self._chol, ys)
        self.ys = ys

    def predict(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std in standardized units."""
        ks = self.signal * rbf(xq, self.x)
        mean = ks @ self._alpha
        v = cho_solve(self._chol, ks.T)
        var = np.maximum(self.signal - np.einsum("ij,ji->i", ks, v), 1e-18)
        return mean, np.sqrt(var)


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float) -> np.ndarray:
    imp = best - mean
    z = imp / std
    return imp * norm.cdf(z) + std * norm.pdf(z)


class GPSampler(Sampler):
    kind = SamplerKind.GP

    def __init__(self, space, seed, budget_hint=1, stage_label="", n_startup=N_STARTUP):
        super().__init__(space, seed, budget_hint, stage_label)
        self.n_startup = n_startup
        self._sobol = qmc.Sobol(space.dim, scramble=True, seed=self.rng)

    def model(self) -> GaussianProcess | None:
        x, y = self._observations()
        if not np.isfinite(y).any():
            return None
        return GaussianProcess(self.space.to_unit(x), fill_infinite(y))

    def acquisition(self, unit_points: np.ndarray) -> np.ndarray:
        gp = self.model()
        mean, std = gp.predict(unit_points)
        return expected_improvement(mean, std, float(np.min(gp.ys)))

    def _propose(self):
        # draw candidates every call so the quasi-random stream stays aligned
        cands = self._sobol.random(N_CANDIDATES)
        if len(self.history) < self.n_startup:
            return self._uniform()
        gp = self.model()
        if gp is None:
            return self._uniform()
        mean, std = gp.predict(cands)
        ei = expected_improvement(mean, std, float(np.min(gp.ys)))
        if not np.all(np.isfinite(ei)) or ei.max() <= 0.0:
            return self._uniform()
        return self.space.from_unit(cands[int(np.argmax(ei))])
