"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs are sized like a 60 s, 24 kHz recording with three units.
"""

import argparse
import timeit

import numpy as np

from spikebench import kernels


def workloads(rng):
    n = 1_440_000
    gt = np.sort(rng.choice(n, 3600, replace=False)).astype(np.int64)
    det = np.sort(np.concatenate([gt + rng.integers(-3, 4, len(gt)), rng.choice(n, 400)])).astype(np.int64)
    cand = rng.permutation(rng.choice(n, 20000, replace=False)).astype(np.int64)
    starts = rng.integers(0, 4 * n, 3600 * 20).astype(np.int64)
    amps = rng.uniform(0.05, 0.2, len(starts))
    shape = rng.standard_normal(200)
    out = np.zeros(4 * n)
    return {
        "greedy_match": lambda b: kernels.greedy_match(gt, det, 12.0, backend=b),
        "lockout_select": lambda b: kernels.lockout_select(cand, n, 24, backend=b),
        "scatter_templates": lambda b: kernels.scatter_templates(out, starts, amps, shape, backend=b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the Python fallback only")
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in workloads(np.random.default_rng(0)).items():
        best = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends}
        row = f"{name:<20}" + "".join(f"{best[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) > 1:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
