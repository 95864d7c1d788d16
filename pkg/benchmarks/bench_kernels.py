"""Time the compiled and numpy batch quadruple scorers on the same inputs.

    python3 benchmarks/bench_kernels.py --points 40 --cap 20000 --repeat 5

Prints one line per backend (best wall time, throughput) and the maximum
score difference between the two, then the speed-up of the compiled kernel.
"""
import argparse
import time

import numpy as np

from homology_match import _core, synthetic
from homology_match.matching import enumerate_quadruples


def make_inputs(points, cap, sigma, seed):
    corr = synthetic.make_fixture(f"noisy:{sigma}", count=points, seed=seed)
    e1, e2 = corr.gt_epipoles
    return corr.ref, corr.qry, e1, e2, enumerate_quadruples(points, cap=cap, seed=seed)


def best_time(scorer, args, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        result = scorer(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--cap", type=int, default=20000)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.points, args.cap, args.sigma, args.seed)
    n = inputs[-1].shape[0]
    print(f"{n} quadruples ({2 * n} plane pairings), best of {args.repeat}")
    timings, results = {}, {}
    for backend in _core.available_backends():
        t, results[backend] = best_time(_core.get_scorer(backend), inputs, args.repeat)
        timings[backend] = t
        print(f"{backend:>7}: {t * 1e3:9.2f} ms  {2 * n / t:12.0f} pairings/s")
    if len(timings) == 2:
        (sp, stp), (sc, stc) = results["python"], results["cython"]
        ok = stp == 0
        diff = float(np.max(np.abs(sp[ok] - sc[ok]))) if ok.any() else 0.0
        print(f"statuses identical: {bool(np.array_equal(stp, stc))}  max score difference: {diff:.2e}")
        print(f"speed-up: {timings['python'] / timings['cython']:.1f}x")
    else:
        print("compiled kernels not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
