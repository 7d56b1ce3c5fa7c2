"""Chaotic amplitude control with momentum (CACm) solver.

The trajectory loop runs in a compiled kernel when the extension is
built, otherwise in a numpy fallback; :func:`set_backend` switches
between them.  The stepwise API (:func:`init_state`, :func:`cacm_step`)
always uses numpy and is meant for inspection and testing.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..ising import DEFAULT_REL_TOL, IsingInstance, _energy, hit_threshold, is_ground_hit
from ..seeding import derive_seed, rng_from_seed
from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

E_FLOOR = 1e-12
INIT_AMPLITUDE = 0.1
DEFAULT_RUNS = 100

_BACKENDS = {"python": _pykernel.run_trajectory}
if _ckernel is not None:
    _BACKENDS["native"] = _ckernel.run_trajectory
_backend = "native" if _ckernel is not None else "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; choose from {available_backends()}")
    _backend = name


@dataclass(frozen=True)
class CacmParams:
    steps: int = 1000
    beta1: float = 1.185
    beta2: float = 1.185
    alpha: float = 0.170
    gamma: float = 1.270
    xi: float = 0.070
    dt: float = 0.5

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        object.__setattr__(self, "steps", int(self.steps))
        for name in ("beta1", "beta2", "alpha", "gamma", "xi", "dt"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def with_values(self, **values) -> "CacmParams":
        return replace(self, **values)


@dataclass
class CacmState:
    x: np.ndarray
    x_prev: np.ndarray
    x_prev2: np.ndarray
    e: np.ndarray
    t_index: int
    best_energy: float
    best_spins: np.ndarray


@dataclass(frozen=True)
class RunResult:
    best_energy: float
    hit_ground: bool
    steps_to_first_hit: int | None
    diverged: bool = False


@dataclass(frozen=True)
class EvalResult:
    p0: float
    tts: float
    runs: int
    mean_best_energy: float
    hits: int = 0
    diverged_runs: int = 0


def beta_schedule(t: int, steps: int, beta1: float, beta2: float) -> float:
    """Linear decay-rate ramp from ``beta1`` (t=0) towards ``beta2``."""
    return beta1 + (t / steps) * (beta2 - beta1)


def tts(p0: float, steps: int) -> float:
    """Time to solution at 99% confidence, in solver steps.

    ``p0 = 0`` gives ``inf``; for ``p0 >= 0.99`` a single run suffices and
    the result is ``steps``.
    """
    if not 0.0 <= p0 <= 1.0 or math.isnan(p0):
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    if steps < 1:
        raise ValueError("steps must be positive")
    if p0 == 0.0:
        return math.inf
    if p0 >= 0.99:
        return float(steps)
    return steps * math.log(0.01) / math.log1p(-p0)


def initial_amplitudes(n_spins: int, seed: int) -> np.ndarray:
    return rng_from_seed(seed).uniform(-INIT_AMPLITUDE, INIT_AMPLITUDE, n_spins)


def _state_from(instance: IsingInstance, x0: np.ndarray) -> CacmState:
    x0 = np.asarray(x0, dtype=np.float64)
    s = _pykernel.spins_of(x0)
    return CacmState(
        x=x0.copy(),
        x_prev=x0.copy(),
        x_prev2=x0.copy(),
        e=np.ones_like(x0),
        t_index=0,
        best_energy=_energy(instance.couplings, s),
        best_spins=s.astype(np.int8),
    )


def init_state(instance: IsingInstance, seed: int) -> CacmState:
    return _state_from(instance, initial_amplitudes(instance.n_spins, seed))


def cacm_step(state: CacmState, instance: IsingInstance, params: CacmParams) -> CacmState:
    """Advance ``state`` by one update; the input state is not modified."""
    w = instance.couplings
    if state.x.shape[0] != instance.n_spins:
        raise ValueError("state dimension does not match instance")
    beta = beta_schedule(state.t_index, params.steps, params.beta1, params.beta2)
    x, xp, xpp, e = _pykernel.step_arrays(
        w, state.x, state.x_prev, state.e, beta,
        params.alpha, params.gamma, params.xi, params.dt, E_FLOOR,
    )
    s = _pykernel.spins_of(x)
    h = _energy(w, s)
    best_energy, best_spins = state.best_energy, state.best_spins
    if h < best_energy:
        best_energy, best_spins = h, s.astype(np.int8)
    return CacmState(x, xp, xpp, e, state.t_index + 1, best_energy, best_spins)


@dataclass(frozen=True)
class Trajectory:
    """Per-step energies and auxiliary means of one run (for diagnostics)."""

    energies: np.ndarray
    e_means: np.ndarray
    best_spins: np.ndarray
    result: RunResult


def _run(instance, params, x0, rel_tol, record):
    threshold = hit_threshold(instance.ground_energy, rel_tol)
    best_spins = np.empty(instance.n_spins, dtype=np.int8)
    n_trace = params.steps if record else 0
    energies = np.full(n_trace, np.nan)
    e_means = np.full(n_trace, np.nan)
    kernel = _BACKENDS[_backend]
    best, first_hit, diverged, _ = kernel(
        instance.couplings, np.ascontiguousarray(x0, dtype=np.float64), params.steps,
        params.beta1, params.beta2, params.alpha, params.gamma, params.xi, params.dt,
        threshold, E_FLOOR, best_spins, energies, e_means,
    )
    if diverged:
        result = RunResult(float(best), False, None, True)
    else:
        hit = is_ground_hit(instance, best, rel_tol)
        result = RunResult(float(best), hit, int(first_hit) if first_hit >= 0 else None)
    return result, energies, e_means, best_spins


def cacm_run(instance: IsingInstance, params: CacmParams, seed: int,
             rel_tol: float = DEFAULT_REL_TOL) -> RunResult:
    """One solver run of ``params.steps`` updates from seeded noise.

    A run whose amplitudes or auxiliary variables become non-finite stops
    early and is reported as a non-hit with ``diverged=True``.
    """
    x0 = initial_amplitudes(instance.n_spins, seed)
    return _run(instance, params, x0, rel_tol, record=False)[0]


def trajectory(instance: IsingInstance, params: CacmParams, seed: int | None = None,
               x0=None, rel_tol: float = DEFAULT_REL_TOL) -> Trajectory:
    """Like :func:`cacm_run` but keeps the energy and mean(e) of every step."""
    if x0 is None:
        if seed is None:
            raise ValueError("give either seed or x0")
        x0 = initial_amplitudes(instance.n_spins, seed)
    result, energies, e_means, best_spins = _run(instance, params, x0, rel_tol, record=True)
    return Trajectory(energies, e_means, best_spins, result)


def evaluate(instance: IsingInstance, params: CacmParams, runs: int = DEFAULT_RUNS,
             master_seed: int = 0, workers: int = 1,
             rel_tol: float = DEFAULT_REL_TOL) -> EvalResult:
    """Estimate the ground-state probability and TTS from ``runs`` runs.

    Run ``k`` uses seed ``derive_seed(master_seed, k)``; results are reduced
    in run order, so the outcome does not depend on ``workers``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    seeds = [derive_seed(master_seed, k) for k in range(runs)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: cacm_run(instance, params, s, rel_tol), seeds))
    else:
        results = [cacm_run(instance, params, s, rel_tol) for s in seeds]
    hits = sum(r.hit_ground for r in results)
    p0 = hits / runs
    mean_best = math.fsum(r.best_energy for r in results) / runs
    return EvalResult(
        p0=p0,
        tts=tts(p0, params.steps),
        runs=runs,
        mean_best_energy=mean_best,
        hits=hits,
        diverged_runs=sum(r.diverged for r in results),
    )


__all__ = [
    "CacmParams", "CacmState", "RunResult", "EvalResult", "Trajectory",
    "beta_schedule", "tts", "init_state", "cacm_step", "cacm_run", "trajectory",
    "evaluate", "initial_amplitudes", "available_backends", "get_backend", "set_backend",
    "E_FLOOR",
]
