"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--frames 3000] [--chars 400] [--repeat 3]
"""

import argparse
import json
import time

import numpy as np

from segaug.kernels import available_backends


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=3000)
    ap.add_argument("--chars", type=int, default=400)
    ap.add_argument("--words", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.frames, 30))
    lp = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
    tokens = rng.integers(1, 30, size=args.chars).astype(np.int64)
    a = rng.integers(0, 50, size=args.words).astype(np.int64)
    b = rng.integers(0, 50, size=args.words).astype(np.int64)
    rows = np.arange(0, args.words + 1, 25, dtype=np.int64)

    backends = available_backends()
    results = {}
    for name, mod in sorted(backends.items()):
        results[name] = {
            "viterbi_align_s": best_of(lambda: mod.viterbi_align(lp, tokens, 0), args.repeat),
            "edit_rows_s": best_of(lambda: mod.edit_rows(a, b, rows), args.repeat),
        }
    if {"cython", "python"} <= set(results):
        # outputs must agree before speed is worth reporting
        s1, p1 = backends["cython"].viterbi_align(lp, tokens, 0)
        s2, p2 = backends["python"].viterbi_align(lp, tokens, 0)
        assert s1 == s2 and np.array_equal(p1, p2)
        assert np.array_equal(backends["cython"].edit_rows(a, b, rows), backends["python"].edit_rows(a, b, rows))
        results["speedup"] = {k: results["python"][k] / results["cython"][k] for k in results["python"]}
    print(json.dumps({"frames": args.frames, "chars": args.chars, "words": args.words, **results}, indent=2))


if __name__ == "__main__":
    main()
