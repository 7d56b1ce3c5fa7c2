"""Compare the compiled CACm kernel with the numpy fallback.

    python3 benchmarks/bench_kernel.py --sizes 12,30,60 --runs 20
"""
import argparse
import time

from cimtune import cacm
from cimtune.cacm import CacmParams, evaluate
from cimtune.ising import WishartSpec, default_m, generate_wishart


def time_backend(name, inst, params, runs, repeat):
    cacm.set_backend(name)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = evaluate(inst, params, runs=runs, master_seed=0)
        best = min(best, time.perf_counter() - t0)
    return best / runs, res.p0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="12,30,60")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = cacm.available_backends()
    if "native" not in backends:
        print("compiled kernel not built; only the python backend is available")
    params = CacmParams(steps=args.steps)
    print(f"{'n':>4} " + " ".join(f"{b + ' ms/run':>16} {'p0':>5}" for b in backends) + f" {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        inst = generate_wishart(WishartSpec(n, default_m(n), 0))
        out = {b: time_backend(b, inst, params, args.runs, args.repeat) for b in backends}
        cols = " ".join(f"{out[b][0] * 1e3:>16.3f} {out[b][1]:>5.2f}" for b in backends)
        ratio = out["python"][0] / out["native"][0] if "native" in out else float("nan")
        print(f"{n:>4} {cols} {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
