"""Compare the compiled and pure-Python simulation kernels.

    python benchmarks/bench_kernels.py [--agents 20] [--horizon 500] [--repeat 3]

Times full runs on a generated instance and the per-step kernels on their
own, and checks that both backends produce byte-identical traces.
"""

import argparse
import io
import time

import numpy as np

from asyncbcd import available_backends, build_schedule, generate_problem, run
from asyncbcd.engine import StopCriteria, trace_rows
from asyncbcd.kernels import get_backend
from asyncbcd.stepsize import plan_for_problem


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def trace_bytes(tr):
    buf = io.StringIO()
    for row in trace_rows(tr):
        buf.write(",".join(row) + "\n")
    return buf.getvalue().encode()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    p = generate_problem(args.seed, args.agents)
    s = build_schedule(p.delays, args.horizon, args.seed)
    plan = plan_for_problem(p, "global")
    stop = StopCriteria(halt=False)
    n, N = p.partition.n, p.N
    Q, r = p.objective.Q, p.objective.r
    lo, hi = p.constraint.lower, p.constraint.upper
    off = p.partition.offsets_array()
    x = np.zeros(n)
    copies = np.zeros((N, n))
    active = np.ones(N, dtype=np.uint8)

    print(f"instance: N={N}, n={n}, horizon={args.horizon}, best of {args.repeat}")
    print(f"{'backend':<8} {'full run [s]':>13} {'quad_eval [us]':>15} {'agent_updates [us]':>19}")
    timings, blobs = {}, {}
    for name in available_backends():
        k = get_backend(name)
        full = best_of(lambda: run(p, s, plan, stop=stop, backend=name), args.repeat)
        g = np.empty(n)
        reps = 200
        qe = best_of(lambda: [k.quad_eval(Q, r, x, g) for _ in range(reps)], args.repeat) / reps
        bufs = (np.empty(n), np.empty(N), np.empty(N), np.empty(N))
        au = best_of(lambda: [k.agent_updates(Q, r, lo, hi, off, plan.gammas, copies.copy(), x.copy(), active,
                                              *bufs) for _ in range(reps)], args.repeat) / reps
        timings[name] = full
        blobs[name] = trace_bytes(run(p, s, plan, stop=stop, backend=name))
        print(f"{name:<8} {full:>13.4f} {qe * 1e6:>15.1f} {au * 1e6:>19.1f}")
    if len(timings) == 2:
        print(f"speedup (python / cython, full run): {timings['python'] / timings['cython']:.1f}x")
        print(f"traces byte-identical: {blobs['python'] == blobs['cython']}")
    else:
        print("compiled backend not available; only the pure-Python kernels were timed")


if __name__ == "__main__":
    main()
