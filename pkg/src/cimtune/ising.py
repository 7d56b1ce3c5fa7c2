"""Ising instances, energies and the Wishart planted ensemble.

Couplings are stored in solver convention ``w``: the energy of a spin
vector ``s`` is ``-0.5 * s @ w @ s``.  In the textbook form
``H = 0.5 * s @ omega @ s`` this is ``omega = -w``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1"
DEFAULT_REL_TOL = 1e-6
DEFAULT_TOP_EIGENVALUE = 10.0
MAX_BRUTE_FORCE_SPINS = 24


class OracleSizeError(ValueError):
    """Raised when exhaustive enumeration is requested for too many spins."""


def as_spins(s, n_spins: int | None = None) -> np.ndarray:
    """Validate a spin configuration and return it as a float64 array."""
    arr = np.asarray(s, dtype=np.float64).reshape(-1)
    if n_spins is not None and arr.shape[0] != n_spins:
        raise ValueError(f"spin configuration has length {arr.shape[0]}, expected {n_spins}")
    if not np.all(np.abs(arr) == 1.0):
        raise ValueError("spins must be exactly -1 or +1")
    return arr


@dataclass(frozen=True)
class IsingInstance:
    couplings: np.ndarray
    planted: np.ndarray
    ground_energy: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.couplings, dtype=np.float64, order="C")
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError("couplings must be a non-empty square matrix")
        if not np.array_equal(w, w.T):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("couplings must have a zero diagonal")
        if not np.all(np.isfinite(w)):
            raise ValueError("couplings must be finite")
        w.setflags(write=False)
        planted = as_spins(self.planted, w.shape[0]).astype(np.int8)
        planted.setflags(write=False)
        object.__setattr__(self, "couplings", w)
        object.__setattr__(self, "planted", planted)
        object.__setattr__(self, "ground_energy", float(self.ground_energy))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_spins(self) -> int:
        return self.couplings.shape[0]

    @classmethod
    def from_couplings(cls, couplings, planted=None, meta=None) -> "IsingInstance":
        """Build an instance, taking ``planted`` as the reference ground state.

        Without ``planted`` the ground state is found by enumeration, so
        this is only usable for small systems in that case.
        """
        w = np.asarray(couplings, dtype=np.float64)
        if planted is None:
            probe = cls(w, np.ones(w.shape[0]), 0.0)
            planted, _ = brute_force_ground(probe)
        planted = as_spins(planted, w.shape[0])
        return cls(w, planted, _energy(w, planted), meta or {})


@dataclass(frozen=True)
class WishartSpec:
    """Parameters of one Wishart planted instance.

    ``top_eigenvalue`` rescales the couplings so the largest eigenvalue of
    ``w`` takes that value; ``None`` keeps the raw ``1/n`` normalization.
    """

    n_spins: int
    m_columns: int
    seed: int
    planted_choice: str = "all_ones"
    top_eigenvalue: float | None = DEFAULT_TOP_EIGENVALUE

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError("n_spins must be >= 2")
        if self.m_columns < 1:
            raise ValueError("m_columns must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.planted_choice not in ("all_ones", "random"):
            raise ValueError(f"unknown planted_choice {self.planted_choice!r}")
        if self.top_eigenvalue is not None and not (
            math.isfinite(self.top_eigenvalue) and self.top_eigenvalue > 0
        ):
            raise ValueError("top_eigenvalue must be positive and finite")


def _energy(w: np.ndarray, s: np.ndarray) -> float:
    return float(-0.5 * (s @ (w @ s)))


def energy(instance: IsingInstance, s) -> float:
    """Ising energy ``-0.5 * s^T w s`` of configuration ``s``."""
    return _energy(instance.couplings, as_spins(s, instance.n_spins))


def default_m(n_spins: int) -> int:
    return math.ceil(0.7 * n_spins)


def generate_wishart(spec: WishartSpec) -> IsingInstance:
    """Generate a Wishart planted instance whose planted state is a ground state.

    Gaussian columns are projected orthogonal to the planted vector ``t``;
    the Gram matrix ``G`` of the projected columns is positive
    semi-definite with ``t`` in its kernel, so ``s^T G s`` (and hence the
    energy, after dropping the constant diagonal) is minimal at ``s = +-t``.
    """
    n, m = spec.n_spins, spec.m_columns
    rng = np.random.default_rng(spec.seed)
    if spec.planted_choice == "random":
        t = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        t = np.ones(n)
    z = rng.standard_normal((n, m))
    cols = z - np.outer(t, (t @ z) / n)
    gram = (cols @ cols.T) / n
    gram = 0.5 * (gram + gram.T)
    np.fill_diagonal(gram, 0.0)
    w = -gram
    if spec.top_eigenvalue is not None:
        top = float(np.linalg.eigvalsh(w)[-1])
        if top > 0:
            w = w * (spec.top_eigenvalue / top)
    meta = {
        "m": m,
        "seed": spec.seed,
        "planted_choice": spec.planted_choice,
        "top_eigenvalue": spec.top_eigenvalue,
    }
    return IsingInstance(w, t, _energy(w, t), meta)


def _enumerate_spins(k: int) -> np.ndarray:
    """All 2**k spin vectors, row r encoding r in binary (bit set -> -1)."""
    if k == 0:
        return np.ones((1, 0))
    codes = np.arange(2**k, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(k, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def brute_force_ground(instance: IsingInstance) -> tuple[np.ndarray, float]:
    """Exhaustive ground-state search; returns (spins, energy).

    Spin 0 is pinned to +1 (global flip symmetry).  Among ties the first
    configuration in enumeration order is returned.
    """
    n = instance.n_spins
    if n > MAX_BRUTE_FORCE_SPINS:
        raise OracleSizeError(f"brute force limited to {MAX_BRUTE_FORCE_SPINS} spins, got {n}")
    w = instance.couplings
    if n == 1:
        return np.ones(1), 0.0
    free = n - 1
    n_low = min(free, 14)
    n_high = free - n_low
    low_idx = np.arange(1, 1 + n_low)
    high_idx = np.concatenate(([0], np.arange(1 + n_low, n)))

    s_low = _enumerate_spins(n_low)
    w_ll = w[np.ix_(low_idx, low_idx)]
    w_lh = w[np.ix_(low_idx, high_idx)]
    w_hh = w[np.ix_(high_idx, high_idx)]
    e_low = -0.5 * np.einsum("ri,ri->r", s_low @ w_ll, s_low)

    best_e = math.inf
    best = None
    for high in _enumerate_spins(n_high):
        s_high = np.concatenate(([1.0], high))
        energies = e_low - s_low @ (w_lh @ s_high) - 0.5 * (s_high @ w_hh @ s_high)
        r = int(np.argmin(energies))
        if energies[r] < best_e:
            best_e = float(energies[r])
            best = (s_low[r], s_high)
    s = np.empty(n)
    s[low_idx] = best[0]
    s[high_idx] = best[1]
    return s, _energy(w, s)


def hit_threshold(ground_energy: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    return ground_energy + rel_tol * max(1.0, abs(ground_energy))


def is_ground_hit(instance: IsingInstance, achieved_energy: float, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    if rel_tol < 0:
        raise ValueError("rel_tol must be non-negative")
    return bool(achieved_energy <= hit_threshold(instance.ground_energy, rel_tol))


def spectral_gap(instance: IsingInstance) -> float:
    """Energy gap between the ground state and the first level above it.

    Enumeration based; only the global-flip partner is identified with
    the ground state, other degenerate minima give a zero gap.
    """
    n = instance.n_spins
    if n > MAX_BRUTE_FORCE_SPINS:
        raise OracleSizeError(f"brute force limited to {MAX_BRUTE_FORCE_SPINS} spins, got {n}")
    if n == 1:
        return math.inf
    s = _enumerate_spins(n - 1)
    s = np.hstack([np.ones((s.shape[0], 1)), s])
    energies = np.sort(-0.5 * np.einsum("ri,ri->r", s @ instance.couplings, s))
    return float(energies[1] - energies[0]) if len(energies) > 1 else math.inf


# -- persistence -------------------------------------------------------------

def _num(x: float) -> str:
    return format(float(x), ".17g")


def dumps_instance(instance: IsingInstance) -> str:
    meta = {
        "m": instance.meta.get("m"),
        "seed": instance.meta.get("seed"),
        "planted_choice": instance.meta.get("planted_choice"),
        "format_version": FORMAT_VERSION,
    }
    if instance.meta.get("top_eigenvalue") is not None:
        meta["top_eigenvalue"] = instance.meta["top_eigenvalue"]
    couplings = ",".join(_num(v) for v in instance.couplings.ravel())
    planted = ",".join(str(int(v)) for v in instance.planted)
    return (
        "{"
        f'"n":{instance.n_spins},'
        f'"couplings":[{couplings}],'
        f'"planted":[{planted}],'
        f'"ground_energy":{_num(instance.ground_energy)},'
        f'"meta":{json.dumps(meta, sort_keys=True)}'
        "}\n"
    )


def loads_instance(text: str) -> IsingInstance:
    doc = json.loads(text)
    n = int(doc["n"])
    couplings = np.asarray(doc["couplings"], dtype=np.float64)
    if couplings.size != n * n:
        raise ValueError(f"expected {n * n} couplings, got {couplings.size}")
    meta = dict(doc.get("meta", {}))
    version = meta.pop("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format_version {version!r}")
    return IsingInstance(couplings.reshape(n, n), doc["planted"], doc["ground_energy"], meta)


def save_instance(instance: IsingInstance, path) -> None:
    Path(path).write_text(dumps_instance(instance))


def load_instance(path) -> IsingInstance:
    return loads_instance(Path(path).read_text())
