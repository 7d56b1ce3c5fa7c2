"""Pure numpy CACm trajectory kernel (fallback for the compiled one)."""
from __future__ import annotations

import numpy as np


def spins_of(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, 1.0, -1.0)


def step_arrays(w, x, xp, e, beta, alpha, gamma, xi, dt, e_floor):
    """One CACm update.  Returns the new (x, xp, xpp, e)."""
    xpp = xp
    xp = x
    y = np.tanh(xp)
    mu = w @ y
    x = xp + dt * (-beta * xp + alpha * e * mu + gamma * (xp - xpp))
    e = e - (xp * xp - 1.0) * e * xi
    e = np.maximum(e, e_floor)
    e = e / np.mean(e)
    return x, xp, xpp, e


@np.errstate(over="ignore", invalid="ignore")  # divergence is detected below
def run_trajectory(w, x0, steps, beta1, beta2, alpha, gamma, xi, dt, threshold,
                   e_floor, best_spins, energy_trace=None, emean_trace=None):
    """Integrate ``steps`` CACm updates from amplitudes ``x0``.

    ``best_spins`` (int8, length n) receives the best configuration.
    Returns ``(best_energy, first_hit, diverged, steps_done)`` where
    ``first_hit`` is the 1-based step whose energy first reached
    ``threshold`` (0 for the initial state, -1 if never).
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    xp = x.copy()
    e = np.ones_like(x)
    s = spins_of(x)
    best = float(-0.5 * (s @ (w @ s)))
    best_spins[:] = s
    first_hit = 0 if best <= threshold else -1
    record = energy_trace is not None and len(energy_trace) > 0
    for t in range(steps):
        beta = beta1 + (t / steps) * (beta2 - beta1)
        x, xp, _, e = step_arrays(w, x, xp, e, beta, alpha, gamma, xi, dt, e_floor)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(e))):
            return best, first_hit, True, t + 1
        s = spins_of(x)
        h = float(-0.5 * (s @ (w @ s)))
        if record:
            energy_trace[t] = h
            emean_trace[t] = np.mean(e)
        if h < best:
            best = h
            best_spins[:] = s
        if first_hit < 0 and h <= threshold:
            first_hit = t + 1
    return best, first_hit, False, steps
