"""Joint and sequential (coordinate-wise) hyperparameter tuning strategies.

All strategies share the same accounting: every call of the objective on
a sampler proposal is a *trial* and counts against the budget.  The one
evaluation of the starting point and the closing confirmation of the
final configuration are bookkeeping evaluations, reported separately in
``Study.meta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cacm import DEFAULT_RUNS, CacmParams, EvalResult, evaluate
from .ising import DEFAULT_REL_TOL, IsingInstance
from .samplers import (
    PortfolioAssignment,
    SamplerKind,
    SearchSpace,
    TrialRecord,
    best_of,
    make_sampler,
    sort_key,
)
from .seeding import derive_seed

PARAM_NAMES = ("beta1", "beta2", "alpha", "gamma", "xi")
KNOWN_BEST = (1.185, 1.185, 0.170, 1.270, 0.070)
DEFAULT_BOUNDS = {
    "beta1": (0.0, 2.0),
    "beta2": (0.0, 2.0),
    "alpha": (0.0, 0.3),
    "gamma": (0.0, 2.0),
    "xi": (0.0, 0.3),
}
EVAL_STREAM = 1 << 20  # derive_seed index reserved for the study's evaluation seed


def study_eval_seed(master_seed: int) -> int:
    return derive_seed(master_seed, EVAL_STREAM)


@dataclass(frozen=True)
class TunableSet:
    names: tuple[str, ...]
    initial_values: tuple[float, ...]
    space: SearchSpace

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "initial_values", tuple(float(v) for v in self.initial_values))
        if len(self.names) != len(self.initial_values) or len(self.names) != self.space.dim:
            raise ValueError("names, initial values and space must have the same dimension")
        if tuple(self.space.names) != self.names:
            raise ValueError("space dimensions must follow the order of names")
        if not self.space.contains(self.initial_values):
            raise ValueError("initial values must lie inside the search space")

    @classmethod
    def default(cls) -> "TunableSet":
        return cls(PARAM_NAMES, KNOWN_BEST, SearchSpace.from_bounds(DEFAULT_BOUNDS))

    @property
    def n_params(self) -> int:
        return len(self.names)

    def as_dict(self, vector) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, vector)}


@dataclass
class CimObjective:
    """TTS of the CACm solver as a function of the tunable parameters.

    Every evaluation reuses ``eval_seed`` (common random numbers), so the
    objective is deterministic within a study.
    """

    instance: IsingInstance
    steps: int = 1000
    dt: float = 0.5
    runs_per_eval: int = DEFAULT_RUNS
    eval_seed: int = 0
    names: tuple[str, ...] = PARAM_NAMES
    space: SearchSpace = field(default_factory=lambda: SearchSpace.from_bounds(DEFAULT_BOUNDS))
    base: CacmParams = field(default_factory=CacmParams)
    workers: int = 1
    rel_tol: float = DEFAULT_REL_TOL

    def params_for(self, point) -> CacmParams:
        p = np.asarray(point, dtype=float)
        if not self.space.contains(p):
            raise ValueError(f"point {p.tolist()} outside the search space")
        values = dict(zip(self.names, p.tolist()))
        return self.base.with_values(steps=self.steps, dt=self.dt, **values)

    def __call__(self, point) -> EvalResult:
        return evaluate(self.instance, self.params_for(point), self.runs_per_eval,
                        self.eval_seed, workers=self.workers, rel_tol=self.rel_tol)

    def describe(self) -> dict:
        return {
            "steps": self.steps,
            "dt": self.dt,
            "runs_per_eval": self.runs_per_eval,
            "eval_seed": self.eval_seed,
            "rel_tol": self.rel_tol,
            "n_spins": self.instance.n_spins,
            "instance_meta": dict(self.instance.meta),
            "ground_energy": self.instance.ground_energy,
        }


def objective(point, spec: CimObjective) -> float:
    return spec(point).tts


@dataclass(frozen=True)
class Trial:
    trial_id: int
    stage_index: int
    target_param: str
    point: dict[str, float]
    tts: float
    p0: float | None
    sampler: str
    timestamp: int


@dataclass
class StageRecord:
    stage_index: int
    target_param: str
    sampler: str
    trials: list[Trial]
    incumbent_before: dict[str, float]
    incumbent_after: dict[str, float]
    incumbent_value_before: float
    incumbent_value_after: float
    phase: str = "sequential"
    probe_value: float | None = None


@dataclass
class Study:
    config: dict
    stages: list[StageRecord]
    best_params: dict[str, float]
    best_value: float
    total_evaluations: int
    master_seed: int
    meta: dict = field(default_factory=dict)

    @property
    def trials(self) -> list[Trial]:
        return [t for s in self.stages for t in s.trials]

    @property
    def best_p0(self) -> float | None:
        return self.meta.get("best_p0")


class _Evaluator:
    """Wraps an objective; counts calls and stamps each with a logical clock."""

    def __init__(self, fn: Callable):
        self.fn = fn
        self.clock = 0
        self.trial_evaluations = 0
        self.extra_evaluations = 0

    def __call__(self, vector, extra: bool = False) -> tuple[float, float | None, int]:
        out = self.fn(np.asarray(vector, dtype=float))
        if hasattr(out, "tts"):
            value, p0 = float(out.tts), float(out.p0)
        else:
            value, p0 = float(out), None
        if math.isnan(value) or value == -math.inf:
            raise ValueError(f"objective returned {value}")
        self.clock += 1
        if extra:
            self.extra_evaluations += 1
        else:
            self.trial_evaluations += 1
        return value, p0, self.clock


def _describe(fn) -> dict:
    return fn.describe() if hasattr(fn, "describe") else {"objective": getattr(fn, "__name__", repr(fn))}


def _run_stage(ev, tunables, name, kind, n_trials, seed, stage_index, start, start_value,
               trial_offset, phase):
    """Tune one parameter with the others frozen at ``start``."""
    idx = tunables.names.index(name)
    sub = tunables.space.subspace([name])
    sampler = make_sampler(kind, sub, seed, n_trials, stage_label=name)
    sampler.tell([start[idx]], start_value, bootstrap=True)
    trials = []
    records = []
    for k in range(n_trials):
        x = sampler.ask()
        candidate = np.array(start, dtype=float)
        candidate[idx] = x[0]
        value, p0, clock = ev(candidate)
        sampler.tell(x, value)
        trials.append(Trial(trial_offset + k, stage_index, name, tunables.as_dict(candidate),
                            value, p0, kind.value, clock))
        records.append(TrialRecord(trial_offset + k, tuple(x.tolist()), value, kind))
    best = best_of(records)
    after, after_value = np.array(start, dtype=float), start_value
    if sort_key(best.value) < sort_key(start_value):
        after[idx] = best.point[0]
        after_value = best.value
    stage = StageRecord(
        stage_index=stage_index,
        target_param=name,
        sampler=kind.value,
        trials=trials,
        incumbent_before=tunables.as_dict(start),
        incumbent_after=tunables.as_dict(after),
        incumbent_value_before=start_value,
        incumbent_value_after=after_value,
        phase=phase,
    )
    return stage, after, after_value, best.value


def _sequential(ev, tunables, order, assignment, per_stage, master_seed, start, start_value,
                stage_offset=0, trial_offset=0):
    stages = []
    incumbent, value = np.array(start, dtype=float), start_value
    for k, name in enumerate(order):
        stage_index = stage_offset + k
        stage, incumbent, value, _ = _run_stage(
            ev, tunables, name, assignment.kind_for(name), per_stage,
            derive_seed(master_seed, stage_index), stage_index, incumbent, value,
            trial_offset + k * per_stage, "sequential",
        )
        stages.append(stage)
    return stages, incumbent, value


def _check_order(order, tunables):
    order = tuple(order)
    if sorted(order) != sorted(tunables.names) or len(set(order)) != len(order):
        raise ValueError(f"order {order} is not a permutation of {tunables.names}")
    return order


def _finish(ev, tunables, config, stages, incumbent, master_seed, meta):
    value, p0, _ = ev(incumbent, extra=True)
    meta = dict(meta, extra_evaluations=ev.extra_evaluations, best_p0=p0)
    return Study(
        config=config,
        stages=stages,
        best_params=tunables.as_dict(incumbent),
        best_value=value,
        total_evaluations=ev.trial_evaluations,
        master_seed=master_seed,
        meta=meta,
    )


def method_a(objective_fn, budget: int, tunables: TunableSet | None = None,
             order: Sequence[str] | None = None, assignment: PortfolioAssignment | None = None,
             master_seed: int = 0) -> Study:
    """Sequential one-parameter-at-a-time tuning in a fixed order.

    Each parameter gets ``budget // n_params`` trials; the leftover is
    discarded and reported.  A stage keeps the incumbent value unless one
    of its trials is strictly better.
    """
    tunables = tunables or TunableSet.default()
    order = _check_order(order or tunables.names, tunables)
    assignment = assignment or PortfolioAssignment()
    assignment.validate(tunables.names)
    n = tunables.n_params
    per_stage = budget // n
    if per_stage < 1:
        raise ValueError(f"budget {budget} leaves no trials for {n} parameters")
    ev = _Evaluator(objective_fn)
    start = np.array(tunables.initial_values)
    start_value, _, _ = ev(start, extra=True)
    stages, incumbent, _ = _sequential(ev, tunables, order, assignment, per_stage,
                                       master_seed, start, start_value)
    config = {
        "method": "a",
        "budget": budget,
        "names": list(tunables.names),
        "initial_values": list(tunables.initial_values),
        "bounds": {r.name: [r.low, r.high] for r in tunables.space.ranges},
        "order": list(order),
        "assignment": assignment.to_dict(),
        "master_seed": master_seed,
        "objective": _describe(objective_fn),
    }
    meta = {"per_stage_trials": per_stage, "leftover_trials": budget - n * per_stage,
            "initial_value": start_value}
    return _finish(ev, tunables, config, stages, incumbent, master_seed, meta)


def method_b(objective_fn, budget: int, y_initial: int = 20, tunables: TunableSet | None = None,
             assignment: PortfolioAssignment | None = None, master_seed: int = 0,
             descending: bool = False) -> Study:
    """Probe every parameter for ``y_initial`` trials, then run Method A in
    order of the probe results on the remaining budget.

    The probe ranks parameters by their best probe value, ascending (the
    parameter that reached the lowest TTS goes first); ``descending=True``
    reverses it.  Ties keep the default order.
    """
    tunables = tunables or TunableSet.default()
    assignment = assignment or PortfolioAssignment()
    assignment.validate(tunables.names)
    n = tunables.n_params
    if y_initial < 1:
        raise ValueError("y_initial must be >= 1")
    remaining = budget - n * y_initial
    if remaining <= 0:
        raise ValueError(f"budget {budget} leaves no trials after {n} x {y_initial} probe trials")
    per_stage = remaining // n
    if per_stage < 1:
        raise ValueError(f"remaining budget {remaining} leaves no trials for {n} parameters")

    ev = _Evaluator(objective_fn)
    start = np.array(tunables.initial_values)
    start_value, _, _ = ev(start, extra=True)

    probes = []
    scores = {}
    for k, name in enumerate(tunables.names):
        stage, _, _, best_value = _run_stage(
            ev, tunables, name, assignment.kind_for(name), y_initial,
            derive_seed(master_seed, k), k, start, start_value, k * y_initial, "probe",
        )
        # the probe never moves the incumbent
        stage.incumbent_after = stage.incumbent_before
        stage.incumbent_value_after = start_value
        stage.probe_value = best_value
        scores[name] = best_value
        probes.append(stage)

    default_rank = {name: i for i, name in enumerate(tunables.names)}
    if descending:
        key = lambda name: (tuple(-v for v in sort_key(scores[name])), default_rank[name])
    else:
        key = lambda name: (sort_key(scores[name]), default_rank[name])
    order = tuple(sorted(tunables.names, key=key))

    stages, incumbent, _ = _sequential(ev, tunables, order, assignment, per_stage, master_seed,
                                       start, start_value, stage_offset=n,
                                       trial_offset=n * y_initial)
    config = {
        "method": "b",
        "budget": budget,
        "y_initial": y_initial,
        "descending": descending,
        "names": list(tunables.names),
        "initial_values": list(tunables.initial_values),
        "bounds": {r.name: [r.low, r.high] for r in tunables.space.ranges},
        "assignment": assignment.to_dict(),
        "master_seed": master_seed,
        "objective": _describe(objective_fn),
    }
    meta = {
        "order": list(order),
        "probe_scores": scores,
        "probe_evaluations": n * y_initial,
        "remaining_budget": remaining,
        "per_stage_trials": per_stage,
        "leftover_trials": remaining - n * per_stage,
        "initial_value": start_value,
    }
    return _finish(ev, tunables, config, probes + stages, incumbent, master_seed, meta)


def conventional(objective_fn, budget: int, tunables: TunableSet | None = None,
                 kind=SamplerKind.TPE, master_seed: int = 0) -> Study:
    """Joint search over all parameters with one sampler, seeded with the
    initial values as a bootstrap observation."""
    tunables = tunables or TunableSet.default()
    kind = SamplerKind(kind)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    ev = _Evaluator(objective_fn)
    start = np.array(tunables.initial_values)
    start_value, start_p0, _ = ev(start, extra=True)
    sampler = make_sampler(kind, tunables.space, derive_seed(master_seed, 0), budget, "joint")
    sampler.tell(start, start_value, bootstrap=True)
    trials = []
    p0s = {-1: start_p0}
    for k in range(budget):
        x = sampler.ask()
        value, p0, clock = ev(x)
        sampler.tell(x, value)
        trials.append(Trial(k, 0, "joint", tunables.as_dict(x), value, p0, kind.value, clock))
        p0s[k] = p0
    candidates = [TrialRecord(-1, tuple(start.tolist()), start_value, kind)] + [
        TrialRecord(t.trial_id, tuple(t.point.values()), t.tts, kind) for t in trials
    ]
    best = best_of(candidates)
    best_vec = np.array(best.point)
    stage = StageRecord(
        stage_index=0,
        target_param="joint",
        sampler=kind.value,
        trials=trials,
        incumbent_before=tunables.as_dict(start),
        incumbent_after=tunables.as_dict(best_vec),
        incumbent_value_before=start_value,
        incumbent_value_after=best.value,
        phase="joint",
    )
    config = {
        "method": "conventional",
        "budget": budget,
        "sampler": kind.value,
        "names": list(tunables.names),
        "initial_values": list(tunables.initial_values),
        "bounds": {r.name: [r.low, r.high] for r in tunables.space.ranges},
        "master_seed": master_seed,
        "objective": _describe(objective_fn),
    }
    meta = {
        "initial_value": start_value,
        "extra_evaluations": ev.extra_evaluations,
        "best_p0": p0s[best.trial_id],
        "best_is_initial": best.trial_id == -1,
    }
    return Study(config, [stage], tunables.as_dict(best_vec), best.value,
                 ev.trial_evaluations, master_seed, meta)


def speedup(conventional_tts: float, proposed_tts: float) -> float:
    """Ratio conventional / proposed; ``inf`` when only the conventional run failed."""
    if not (conventional_tts > 0 and proposed_tts > 0):
        raise ValueError("TTS values must be positive")
    if not math.isfinite(proposed_tts):
        raise ValueError("proposed TTS must be finite")
    return conventional_tts / proposed_tts


def stage_values_monotone(study: Study) -> bool:
    """Incumbent values never increase across (and within) stages."""
    prev = math.inf
    for st in study.stages:
        if sort_key(st.incumbent_value_after) > sort_key(st.incumbent_value_before):
            return False
        if st.phase != "probe":
            if sort_key(st.incumbent_value_after) > sort_key(prev):
                return False
            prev = st.incumbent_value_after
    return True


# -- persistence -------------------------------------------------------------

def _enc(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _enc(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _dec(v):
    return math.inf if v is None else float(v)


def study_lines(study: Study) -> list[str]:
    """JSON-lines representation: config, one line per trial, summary.

    Stage records (without their trials) travel in the summary line.
    """
    dump = lambda rec: json.dumps(_enc(rec), sort_keys=False)
    lines = [dump({"record": "config", **study.config})]
    lines.extend(dump({"record": "trial", **asdict(t)}) for t in study.trials)
    stages = [{k: v for k, v in asdict(st).items() if k != "trials"} for st in study.stages]
    lines.append(dump({
        "record": "summary",
        "best_params": study.best_params,
        "best_value": study.best_value,
        "total_evaluations": study.total_evaluations,
        "master_seed": study.master_seed,
        "meta": study.meta,
        "stages": stages,
    }))
    return lines


def write_study(study: Study, path) -> None:
    Path(path).write_text("\n".join(study_lines(study)) + "\n")


def read_study(path) -> Study:
    config, trials, summary = None, [], None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec.pop("record")
        if kind == "config":
            config = rec
        elif kind == "trial":
            rec["tts"] = _dec(rec["tts"])
            trials.append(Trial(**rec))
        elif kind == "summary":
            summary = rec
        else:
            raise ValueError(f"unknown record type {kind!r}")
    if config is None or summary is None:
        raise ValueError(f"{path}: missing config or summary record")
    by_stage: dict[int, list[Trial]] = {}
    for t in trials:
        by_stage.setdefault(t.stage_index, []).append(t)
    stages = []
    for rec in summary.get("stages", []):
        for key in ("incumbent_value_before", "incumbent_value_after"):
            rec[key] = _dec(rec[key])
        if rec.get("phase") == "probe":
            rec["probe_value"] = _dec(rec.get("probe_value"))
        stages.append(StageRecord(trials=by_stage.get(rec["stage_index"], []), **rec))
    meta = summary.get("meta", {})
    if "probe_scores" in meta:
        meta["probe_scores"] = {k: _dec(v) for k, v in meta["probe_scores"].items()}
    if "initial_value" in meta:
        meta["initial_value"] = _dec(meta["initial_value"])
    return Study(config, stages, summary["best_params"], _dec(summary["best_value"]),
                 summary["total_evaluations"], summary["master_seed"], meta)
