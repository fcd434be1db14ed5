#!/usr/bin/env python3
"""Compare the compiled and pure-Python simulation kernels.

Each workload runs on both kernels with the same seed; the script checks
that the outputs are identical and reports the time per call and the
speed-up. Workload sizes are small enough for the Python kernel to finish
in a few seconds; ``--scale`` multiplies them.

    python3 benchmarks/bench_kernels.py [--scale 2] [--repeat 3] [--json out.json]
"""
import argparse
import json
import sys
import time

import numpy as np

from levy_barrier.simulate import backend

MU, SIGMA = -1.0, 1.0
JD = (-1.0, 2.0, 0.5, 1.0)


def workloads(scale):
    n = max(1, int(2000 * scale))
    paths = max(2, int(8 * scale))
    return {
        "normals": lambda k: k.normals(7, 0, 0, 50 * n),
        "uniforms": lambda k: k.uniforms(7, 0, 1, 50 * n),
        "reflected_bm": lambda k: k.reflected_batch(MU, SIGMA, 0.0, 1.0, 2.17, 1.0, 1e-3, 20.0,
                                                    0.05, 0.0, [], [], 0.0, 7, 0, paths, False),
        "reflected_jd": lambda k: k.reflected_batch(*JD, 2.9, 2.0, 1e-3, 20.0, 0.05, 0.0,
                                                    [], [], 0.0, 7, 0, paths, False),
        "ruin_bm": lambda k: k.ruin_batch(MU, SIGMA, 0.0, 1.0, 2.17, 1.0, 1.05, 1e-3, 20.0, 7, 0,
                                          paths, np.linspace(0.0, 2.17, 11)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def timed(fn, kernel, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(kernel)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the results to this file")
    args = ap.parse_args(argv)

    compiled = backend.compiled_kernel()
    if compiled is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return 1
    python = backend.python_kernel
    rows = []
    print(f"{'workload':<14} {'python [s]':>11} {'compiled [s]':>13} {'speed-up':>9}  identical")
    for name, fn in workloads(args.scale).items():
        tp, op = timed(fn, python, 1)
        tc, oc = timed(fn, compiled, args.repeat)
        ok = same(op, oc)
        rows.append({"workload": name, "python_s": tp, "compiled_s": tc,
                     "speedup": tp / tc if tc > 0 else float("inf"), "identical": ok})
        print(f"{name:<14} {tp:11.4f} {tc:13.6f} {tp / tc:9.1f}  {ok}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
