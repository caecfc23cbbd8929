"""Benchmark the compiled extension against the numpy fallback.

Times every hot kernel both ways on identical inputs and prints one table
row per kernel with the median wall time and the speedup. Run it after
building the extension:

    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --scale 0.25 --repeats 3
"""

import argparse
import sys
import time

import numpy as np

from mbkl import _core_py
from mbkl._backend import words_for

try:
    from mbkl import _core
except ImportError:
    _core = None


def median_time(fn, repeats):
    fn()  # warm up
    laps = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        laps.append(time.perf_counter() - t0)
    return float(np.median(laps))


def build_cases(scale, rng):
    n = max(64, int(2000 * scale))
    d = 64
    count = max(100, int(10000 * scale))
    active = max(50, int(4000 * scale))
    gram_n = max(50, int(600 * scale))
    solve_n = max(40, int(800 * scale))
    solve_m = max(40, int(1200 * scale))
    iters = max(50, int(500 * scale))

    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    idx = np.ascontiguousarray(rng.integers(0, d, count, dtype=np.uint32))
    thr = np.ascontiguousarray(rng.normal(size=count))
    stump_words = np.empty((count, words_for(n)), np.uint64)
    _core_py.eval_pack_stumps(X, idx, thr, stump_words)
    sample_words = np.empty((n, words_for(count)), np.uint64)
    _core_py.eval_pack_samples(X, idx, thr, sample_words)
    masks = rng.integers(0, 2 ** 64, (d, words_for(n)), dtype=np.uint64)
    gram_words = sample_words[:gram_n]

    aidx = np.ascontiguousarray(idx[:active])
    athr = np.ascontiguousarray(thr[:active])
    delta = np.ascontiguousarray(rng.normal(size=(2, active)))
    base = np.ascontiguousarray(rng.normal(size=2))

    A = np.ascontiguousarray(rng.normal(size=(solve_n, solve_m + 1)))
    a_scale = float(np.linalg.norm(A, 2))
    tau = np.full(solve_m + 1, 0.99 / a_scale)
    sig = np.full(solve_n, 1.0 / a_scale)

    Z = np.ascontiguousarray(rng.normal(size=(solve_n, solve_m)))
    yz = np.where(rng.random(solve_n) < 0.5, 1.0, -1.0)
    yz[0], yz[1] = 1.0, -1.0
    step = 1.0 / float(np.linalg.norm(Z, 2)) ** 2

    def run_eval_stumps(mod):
        out = np.empty((count, words_for(n)), np.uint64)
        mod.eval_pack_stumps(X, idx, thr, out)

    def run_eval_samples(mod):
        out = np.empty((n, words_for(count)), np.uint64)
        mod.eval_pack_samples(X, idx, thr, out)

    def run_popcount(mod):
        out = np.empty(count, np.int64)
        mod.popcount_rows(stump_words, out)

    def run_popcount_and(mod):
        out = np.empty((d, count), np.int64)
        mod.popcount_rows_and(stump_words, masks, out)

    def run_gram(mod):
        out = np.empty((gram_n, gram_n), np.int64)
        mod.hamming_gram(gram_words, out)

    def run_predict(mod):
        out = np.empty((n, 2))
        mod.predict_scores(X, aidx, athr, delta, base, out)

    def run_l1(mod):
        u = np.zeros(solve_m + 1)
        ubar = np.zeros(solve_m + 1)
        p = np.zeros(solve_n)
        atp = np.empty(solve_m + 1)
        mod.l1_pdhg_chunk(A, u, ubar, p, tau, sig, 2.0, solve_m, iters, atp)

    def run_l2(mod):
        alpha = np.zeros(solve_n)
        beta = np.zeros(solve_n)
        tmom = np.array([1.0])
        bufs = [np.empty(solve_m), np.empty(solve_n), np.empty(solve_n)]
        mod.l2_apgd_chunk(Z, yz, alpha, beta, tmom, step, 1.5, iters, *bufs)

    label_iters = f"{iters} iters"
    return [
        (f"eval+pack stump-major ({count}x{n})", run_eval_stumps),
        (f"eval+pack sample-major ({count}x{n})", run_eval_samples),
        (f"popcount rows ({count}x{words_for(n)}w)", run_popcount),
        (f"popcount rows AND ({d} masks)", run_popcount_and),
        (f"hamming gram ({gram_n}x{gram_n})", run_gram),
        (f"predict scores ({n}x{active})", run_predict),
        (f"l1 solver chunk ({solve_n}x{solve_m}, {label_iters})", run_l1),
        (f"l2 solver chunk ({solve_n}x{solve_m}, {label_iters})", run_l2),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0,
                    help="problem size multiplier")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed repeats per kernel (median reported)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; nothing to compare "
              "(pip install -e . --no-build-isolation rebuilds it)")
        return 1
    rng = np.random.default_rng(args.seed)
    cases = build_cases(args.scale, rng)
    width = max(len(name) for name, _ in cases)
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'fallback':>10}  "
          f"{'speedup':>7}")
    for name, run in cases:
        tc = median_time(lambda: run(_core), args.repeats)
        tf = median_time(lambda: run(_core_py), args.repeats)
        print(f"{name:<{width}}  {tc * 1e3:>8.2f}ms  {tf * 1e3:>8.2f}ms  "
              f"{tf / tc:>6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
