"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import cacm
from .bench import BenchPlan, rows_from_studies, run_bench, summarize, write_outputs, BenchResult
from .ising import (
    DEFAULT_TOP_EIGENVALUE,
    MAX_BRUTE_FORCE_SPINS,
    WishartSpec,
    brute_force_ground,
    default_m,
    energy,
    generate_wishart,
    load_instance,
    save_instance,
    spectral_gap,
)
from .samplers import PortfolioAssignment, SamplerKind
from .tuner import (
    KNOWN_BEST,
    PARAM_NAMES,
    CimObjective,
    TunableSet,
    conventional,
    method_a,
    method_b,
    study_eval_seed,
    write_study,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _csv_list(conv):
    def parse(text):
        return tuple(conv(v) for v in text.split(",") if v)
    return parse


def _top_eigenvalue(text):
    if text.lower() in ("none", "raw", "0"):
        return None
    return float(text)


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.1f}"


def _add_solver_flags(p, with_params=True):
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--runs", type=int, default=cacm.DEFAULT_RUNS, help="solver runs per evaluation")
    p.add_argument("--workers", type=int, default=1, help="threads for the runs of one evaluation")
    p.add_argument("--backend", choices=["native", "python"], default=None)
    if with_params:
        for name, value in zip(PARAM_NAMES, KNOWN_BEST):
            p.add_argument(f"--{name}", type=float, default=value)


def _apply_backend(args):
    if getattr(args, "backend", None):
        try:
            cacm.set_backend(args.backend)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


def cmd_gen(args):
    m = args.m if args.m is not None else default_m(args.n)
    try:
        spec = WishartSpec(args.n, m, args.seed, args.planted, args.top_eigenvalue)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    inst = generate_wishart(spec)
    save_instance(inst, args.out)
    print(f"n={inst.n_spins} m={m} seed={args.seed} planted={args.planted} "
          f"top_eigenvalue={args.top_eigenvalue} ground_energy={inst.ground_energy!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args):
    inst = load_instance(args.instance)
    ok = True
    e_planted = energy(inst, inst.planted)
    print(f"n={inst.n_spins} ground_energy={inst.ground_energy!r}")
    if e_planted != inst.ground_energy:
        print(f"FAIL energy(planted)={e_planted!r} differs from stored ground_energy")
        ok = False
    else:
        print("ok   energy(planted) matches ground_energy")
    if inst.n_spins <= MAX_BRUTE_FORCE_SPINS:
        _, e_min = brute_force_ground(inst)
        if abs(e_min - inst.ground_energy) <= 1e-9 * max(1.0, abs(e_min)):
            print(f"ok   brute-force minimum {e_min!r} equals ground_energy")
        else:
            print(f"FAIL brute-force minimum {e_min!r} below ground_energy")
            ok = False
        print(f"gap  {spectral_gap(inst)!r}")
    else:
        print(f"skip brute force (n > {MAX_BRUTE_FORCE_SPINS})")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_solve(args):
    _apply_backend(args)
    inst = load_instance(args.instance)
    try:
        params = cacm.CacmParams(args.steps, args.beta1, args.beta2, args.alpha, args.gamma,
                                 args.xi, args.dt)
        if args.runs < 1:
            raise ValueError("--runs must be >= 1")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = cacm.evaluate(inst, params, args.runs, args.seed, workers=args.workers)
    print(f"backend={cacm.get_backend()} runs={res.runs} seed={args.seed}")
    print(f"p0={res.p0!r}")
    print(f"tts={_fmt(res.tts)}")
    print(f"mean_best_energy={res.mean_best_energy!r}")
    print(f"ground_energy={inst.ground_energy!r}")
    print(f"diverged_runs={res.diverged_runs}")
    return EXIT_OK


def _assignment(args) -> PortfolioAssignment:
    mapping = {}
    for item in args.assign or []:
        name, _, kind = item.partition("=")
        mapping[name] = kind
    return PortfolioAssignment(SamplerKind(args.sampler), mapping)


def cmd_tune(args):
    _apply_backend(args)
    inst = load_instance(args.instance)
    tunables = TunableSet.default()
    try:
        assignment = _assignment(args)
        obj = CimObjective(inst, steps=args.steps, dt=args.dt, runs_per_eval=args.runs,
                           eval_seed=study_eval_seed(args.seed), workers=args.workers)
        if args.method == "conventional":
            if assignment.mapping:
                raise ValueError("--assign is only meaningful for methods a and b")
            study = conventional(obj, args.budget, tunables, assignment.default_kind, args.seed)
        elif args.method == "a":
            order = args.order or tunables.names
            study = method_a(obj, args.budget, tunables, order, assignment, args.seed)
        else:
            study = method_b(obj, args.budget, args.y_initial, tunables, assignment, args.seed,
                             descending=args.descending)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        write_study(study, args.out)
    print(f"method={args.method} sampler={args.sampler} budget={args.budget} seed={args.seed} "
          f"eval_seed={obj.eval_seed} evaluations={study.total_evaluations}")
    print(f"{'stage':>5} {'param':>7} {'sampler':>7} {'trials':>6} {'tts_after':>10}")
    for st in study.stages:
        print(f"{st.stage_index:>5} {st.target_param:>7} {st.sampler:>7} {len(st.trials):>6} "
              f"{_fmt(st.incumbent_value_after):>10}")
    print("best " + " ".join(f"{k}={v:.4f}" for k, v in study.best_params.items()))
    print(f"tts={_fmt(study.best_value)} p0={study.best_p0}")
    return EXIT_OK


def _bench_instance(args):
    if args.instance:
        return load_instance(args.instance)
    m = args.m if args.m is not None else default_m(args.n)
    return generate_wishart(WishartSpec(args.n, m, args.instance_seed, "all_ones", args.top_eigenvalue))


def _print_summary(rows):
    print(f"{'method':>12} {'sampler':>7} {'budget':>6} {'mean':>10} {'median':>10} "
          f"{'inf':>4} {'speedup':>8}")
    for rec in summarize(rows):
        sp = rec["speedup_of_means"]
        print(f"{rec['method']:>12} {rec['sampler']:>7} {rec['budget']:>6} "
              f"{_fmt(rec['mean_tts']):>10} {_fmt(rec['median_tts']):>10} {rec['n_infinite']:>4} "
              f"{'' if math.isnan(sp) else f'{sp:.2f}x':>8}")


def cmd_bench(args):
    _apply_backend(args)
    try:
        plan = BenchPlan(
            methods=args.methods, samplers=args.samplers, budgets=args.budgets,
            repetitions=args.repetitions, y_initial=args.y_initial, runs_per_eval=args.runs,
            steps=args.steps, dt=args.dt, seed=args.seed, scaling_budgets=args.scaling_budgets,
            scaling_sampler=args.scaling_sampler, workers=args.workers,
        )
        inst = _bench_instance(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = run_bench(plan, inst, args.out_dir)
    _print_summary(result.rows)
    print(f"wrote {Path(args.out_dir) / 'bench.csv'}")
    if result.failures:
        print(f"{len(result.failures)} failed cell(s)", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_report(args):
    rows = rows_from_studies(args.studies)
    if not rows:
        print(f"no study files in {args.studies}", file=sys.stderr)
        return EXIT_RUNTIME
    reps = max(r.repetition for r in rows) + 1
    write_outputs(BenchResult(rows), BenchPlan(repetitions=reps), args.out_dir)
    _print_summary(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cimtune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a Wishart planted instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None, help="Wishart columns (default ceil(0.7 n))")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planted", choices=["all_ones", "random"], default="all_ones")
    p.add_argument("--top-eigenvalue", type=_top_eigenvalue, default=DEFAULT_TOP_EIGENVALUE,
                   help="rescale couplings to this largest eigenvalue ('none' keeps 1/n scaling)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="check an instance file against the brute-force oracle")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="estimate p0 and TTS for one parameter set")
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tune", help="run one tuning study")
    p.add_argument("--method", choices=["conventional", "a", "b"], required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--sampler", choices=[k.value for k in SamplerKind], default="tpe")
    p.add_argument("--assign", action="append", metavar="PARAM=SAMPLER",
                   help="per-parameter sampler (methods a/b), repeatable")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--y-initial", type=int, default=20)
    p.add_argument("--order", type=_csv_list(str), default=None)
    p.add_argument("--descending", action="store_true",
                   help="method b: tune parameters in descending order of probe TTS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="study JSONL path")
    _add_solver_flags(p, with_params=False)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bench", help="run the strategy x sampler x budget matrix")
    p.add_argument("--instance", default=None)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--instance-seed", type=int, default=0)
    p.add_argument("--top-eigenvalue", type=_top_eigenvalue, default=DEFAULT_TOP_EIGENVALUE)
    p.add_argument("--methods", type=_csv_list(str), default=("conventional", "a", "b"))
    p.add_argument("--samplers", type=_csv_list(str), default=tuple(k.value for k in SamplerKind))
    p.add_argument("--budgets", type=_csv_list(int), default=(100, 1000))
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--y-initial", type=int, default=20)
    p.add_argument("--scaling-budgets", type=_csv_list(int), default=(100, 500, 1000))
    p.add_argument("--scaling-sampler", default="tpe")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_solver_flags(p, with_params=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="rebuild bench tables from stored study files")
    p.add_argument("--studies", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
