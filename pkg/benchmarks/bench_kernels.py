#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against the pure-numpy fallback.

Runs the bit-packed GF(2) multiply/rank kernels and the union-find orbit
labelling on sized-up random inputs, then re-executes itself in a
subprocess with CFIKIT_NO_NUMBA=1 and prints both timings side by side.

Usage: python3 benchmarks/bench_kernels.py [--sizes 256,512,1024] [--seed 0]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run_benchmarks(sizes, seed):
    from cfikit._accel import USE_NUMBA, gf2_mul, gf2_rank, orbit_labels, pack_rows

    rng = np.random.default_rng(seed)
    results = {"numba": USE_NUMBA, "cases": []}

    for n in sizes:
        a = pack_rows(rng.integers(0, 2, size=(n, n), dtype=np.uint8))
        b = pack_rows(rng.integers(0, 2, size=(n, n), dtype=np.uint8))
        # Warm the JIT once per kernel before timing.
        gf2_mul(a[:2], n, b)
        gf2_rank(a[:2].copy(), n)
        results["cases"].append(
            {
                "kernel": "gf2_mul",
                "n": n,
                "seconds": _time(gf2_mul, a, n, b),
            }
        )
        results["cases"].append(
            {
                "kernel": "gf2_rank",
                "n": n,
                "seconds": _time(lambda: gf2_rank(a.copy(), n)),
            }
        )

    for n in sizes:
        perms = np.vstack(
            [rng.permutation(n).astype(np.int64) for _ in range(8)]
        )
        orbit_labels(perms[:1], n)
        results["cases"].append(
            {
                "kernel": "orbit_labels",
                "n": n,
                "seconds": _time(orbit_labels, perms, n),
            }
        )
    return results


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="256,512,1024")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--emit-json", action="store_true", help="print raw results only"
    )
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    results = run_benchmarks(sizes, args.seed)
    if args.emit_json:
        json.dump(results, sys.stdout)
        return 0

    if not results["numba"]:
        print("numba unavailable or disabled; only the fallback was measured")
        _print_table(results, None)
        return 0

    env = dict(os.environ, CFIKIT_NO_NUMBA="1")
    proc = subprocess.run(
        [
            sys.executable,
            os.path.abspath(__file__),
            "--sizes",
            args.sizes,
            "--seed",
            str(args.seed),
            "--emit-json",
        ],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    fallback = json.loads(proc.stdout)
    _print_table(results, fallback)
    return 0


def _print_table(fast, slow):
    header = f"{'kernel':<14}{'n':>6}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    slow_cases = slow["cases"] if slow else [None] * len(fast["cases"])
    for f, s in zip(fast["cases"], slow_cases):
        numba_t = f["seconds"]
        if s is None:
            print(f"{f['kernel']:<14}{f['n']:>6}{numba_t:>12.4f}{'-':>12}{'-':>10}")
        else:
            ratio = s["seconds"] / numba_t if numba_t > 0 else float("inf")
            print(
                f"{f['kernel']:<14}{f['n']:>6}{numba_t:>12.4f}"
                f"{s['seconds']:>12.4f}{ratio:>9.1f}x"
            )


if __name__ == "__main__":
    sys.exit(main())
