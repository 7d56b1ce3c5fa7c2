"""Benchmark matrix: strategies x samplers x budgets x repetitions."""
from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .ising import IsingInstance
from .samplers import PortfolioAssignment, SamplerKind
from .seeding import derive_seed
from .tuner import (
    CimObjective,
    Study,
    TunableSet,
    conventional,
    method_a,
    method_b,
    read_study,
    study_eval_seed,
    write_study,
)

log = logging.getLogger(__name__)

METHODS = ("conventional", "a", "b")
ALL_SAMPLERS = tuple(k.value for k in SamplerKind)
BENCH_HEADER = ["method", "sampler", "budget", "repetition", "tts", "p0_best", "evals", "seed"]
SUMMARY_HEADER = [
    "method", "sampler", "budget", "n_ok", "n_failed", "n_infinite",
    "mean_tts", "median_tts", "var_tts", "speedup_of_means", "mean_of_speedups", "n_paired",
]
SCALING_HEADER = ["sampler", "budget", "repetition", "tts", "seed"]


@dataclass
class BenchPlan:
    methods: tuple[str, ...] = METHODS
    samplers: tuple[str, ...] = ALL_SAMPLERS
    budgets: tuple[int, ...] = (100, 1000)
    repetitions: int = 10
    y_initial: int = 20
    runs_per_eval: int = 100
    steps: int = 1000
    dt: float = 0.5
    seed: int = 0
    scaling_budgets: tuple[int, ...] = (100, 500, 1000)
    scaling_sampler: str = "tpe"
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(b < 1 for b in self.budgets) or any(b < 1 for b in self.scaling_budgets):
            raise ValueError("budgets must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        for s in self.samplers:
            SamplerKind(s)
        SamplerKind(self.scaling_sampler)

    def repetition_seed(self, repetition: int) -> int:
        # shared by every cell: repetitions are paired across methods and samplers
        return derive_seed(self.seed, repetition)

    def probe_trials(self, budget: int, n_params: int) -> int:
        """Probe trials per parameter for Method B, capped at half the budget."""
        return max(1, min(self.y_initial, budget // (2 * n_params)))


@dataclass
class Row:
    method: str
    sampler: str
    budget: int
    repetition: int
    tts: float | None  # None marks a failed cell
    p0_best: float | None
    evals: int
    seed: int

    def csv(self) -> list:
        if self.tts is None:
            tts = "failed"
        else:
            tts = "inf" if math.isinf(self.tts) else repr(self.tts)
        p0 = "" if self.p0_best is None else repr(self.p0_best)
        return [self.method, self.sampler, self.budget, self.repetition, tts, p0, self.evals, self.seed]


@dataclass
class BenchResult:
    rows: list[Row]
    scaling: list[Row] = field(default_factory=list)

    @property
    def failures(self) -> list[Row]:
        return [r for r in self.rows + self.scaling if r.tts is None]


def run_study(method: str, sampler: str, budget: int, instance: IsingInstance, plan: BenchPlan,
              master_seed: int, tunables: TunableSet | None = None) -> Study:
    tunables = tunables or TunableSet.default()
    obj = CimObjective(instance, steps=plan.steps, dt=plan.dt, runs_per_eval=plan.runs_per_eval,
                       eval_seed=study_eval_seed(master_seed), workers=plan.workers)
    assignment = PortfolioAssignment.uniform(sampler)
    if method == "conventional":
        return conventional(obj, budget, tunables, sampler, master_seed)
    if method == "a":
        return method_a(obj, budget, tunables, assignment=assignment, master_seed=master_seed)
    y = plan.probe_trials(budget, tunables.n_params)
    return method_b(obj, budget, y, tunables, assignment=assignment, master_seed=master_seed)


def _row_from(study: Study, method, sampler, budget, repetition, seed) -> Row:
    return Row(method, sampler, budget, repetition, study.best_value, study.best_p0,
               study.total_evaluations, seed)


def run_bench(plan: BenchPlan, instance: IsingInstance, out_dir=None) -> BenchResult:
    """Run every cell of the plan; a failing study marks its cell and the run goes on."""
    studies_dir = None
    if out_dir is not None:
        studies_dir = Path(out_dir) / "studies"
        studies_dir.mkdir(parents=True, exist_ok=True)
    cache: dict[tuple, Row] = {}

    def cell(method, sampler, budget, rep):
        key = (method, sampler, budget, rep)
        if key in cache:
            return cache[key]
        seed = plan.repetition_seed(rep)
        try:
            study = run_study(method, sampler, budget, instance, plan, seed)
        except Exception as exc:  # noqa: BLE001 - recorded as a failed cell
            log.error("study %s failed: %s", key, exc)
            row = Row(method, sampler, budget, rep, None, None, 0, seed)
        else:
            study.config["repetition"] = rep
            study.config["sampler"] = sampler
            if studies_dir is not None:
                write_study(study, studies_dir / f"{method}_{sampler}_{budget}_r{rep:03d}.jsonl")
            row = _row_from(study, method, sampler, budget, rep, seed)
            log.info("%s %s budget=%d rep=%d tts=%s", method, sampler, budget, rep, row.tts)
        cache[key] = row
        return row

    rows = [cell(m, s, b, r)
            for b in plan.budgets for m in plan.methods for s in plan.samplers
            for r in range(plan.repetitions)]
    scaling = [cell("conventional", plan.scaling_sampler, b, r)
               for b in plan.scaling_budgets for r in range(plan.repetitions)]
    result = BenchResult(rows, scaling)
    if out_dir is not None:
        write_outputs(result, plan, out_dir)
    return result


def _median(values: list[float]) -> float:
    return statistics.median(values) if values else math.nan


def summarize(rows: list[Row]) -> list[dict]:
    cells: dict[tuple, list[Row]] = {}
    for r in rows:
        cells.setdefault((r.method, r.sampler, r.budget), []).append(r)
    out = []
    for (method, sampler, budget), rs in cells.items():
        ok = [r for r in rs if r.tts is not None]
        finite = [r.tts for r in ok if math.isfinite(r.tts)]
        conv = {r.repetition: r.tts for r in cells.get(("conventional", sampler, budget), [])
                if r.tts is not None}
        mean = statistics.fmean(finite) if finite else math.inf
        conv_finite = [v for v in conv.values() if math.isfinite(v)]
        conv_mean = statistics.fmean(conv_finite) if conv_finite else math.inf
        ratios = [conv[r.repetition] / r.tts for r in ok
                  if r.repetition in conv and math.isfinite(r.tts) and math.isfinite(conv[r.repetition])]
        out.append({
            "method": method,
            "sampler": sampler,
            "budget": budget,
            "n_ok": len(ok),
            "n_failed": len(rs) - len(ok),
            "n_infinite": len(ok) - len(finite),
            "mean_tts": mean,
            "median_tts": _median([r.tts for r in ok]),
            "var_tts": statistics.variance(finite) if len(finite) > 1 else math.nan,
            "speedup_of_means": conv_mean / mean if math.isfinite(mean) and conv else math.nan,
            "mean_of_speedups": statistics.fmean(ratios) if ratios else math.nan,
            "n_paired": len(ratios),
        })
    return out


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf"
        return f"{v:.6g}"
    return v


def write_outputs(result: BenchResult, plan: BenchPlan, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        w.writerows(r.csv() for r in result.rows)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for rec in summarize(result.rows):
            w.writerow([_fmt(rec[k]) for k in SUMMARY_HEADER])
    with open(out / "scaling.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCALING_HEADER)
        for r in result.scaling:
            w.writerow([r.sampler, r.budget, r.repetition, r.csv()[4], r.seed])
    plan_doc = asdict(plan)
    plan_doc["repetition_seeds"] = [plan.repetition_seed(r) for r in range(plan.repetitions)]
    plan_doc["method_b_probe_trials"] = {str(b): plan.probe_trials(b, 5) for b in plan.budgets}
    (out / "plan.json").write_text(json.dumps(plan_doc, indent=2, sort_keys=True) + "\n")


def rows_from_studies(studies_dir) -> list[Row]:
    """Rebuild bench rows from stored study files."""
    rows = []
    for path in sorted(Path(studies_dir).glob("*.jsonl")):
        study = read_study(path)
        cfg = study.config
        sampler = cfg.get("sampler") or cfg.get("assignment", {}).get("default", "")
        rows.append(_row_from(study, cfg["method"], sampler, cfg["budget"],
                              cfg.get("repetition", 0), study.master_seed))
    rows.sort(key=lambda r: (r.budget, METHODS.index(r.method), ALL_SAMPLERS.index(r.sampler),
                             r.repetition))
    return rows
