"""Compare the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from monotest import _pykernels

try:
    from monotest import _ckernels
except ImportError:
    _ckernels = None


def collision_case(rng, n=2**14, samples=200_000, intervals=512):
    s = np.sort(rng.integers(1, n + 1, size=samples))
    starts = np.sort(rng.integers(1, n + 1, size=intervals))
    ends = np.minimum(starts + rng.integers(0, n // 8, size=intervals), n)
    return s, starts, ends


def fixup_case(rng, ell=256):
    w = rng.random(ell) ** 3
    return w / w.sum(), np.full(ell - 1, 1.05)


def bench(fn, make_args, repeat):
    times = timeit.repeat(lambda: fn(*make_args()), number=1, repeat=repeat)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    rng = np.random.default_rng(0)
    coll = collision_case(rng)
    w, r = fixup_case(rng)
    cases = [
        ("interval_collisions", "interval_collisions", lambda: coll),
        ("fixup_weights", "fixup_weights", lambda: (w.copy(), r)),
    ]
    print(f"{'kernel':22s} {'python (s)':>12s} {'cython (s)':>12s} {'speedup':>9s}")
    for name, attr, args in cases:
        tp = bench(getattr(_pykernels, attr), args, a.repeat)
        if _ckernels is None:
            print(f"{name:22s} {tp:12.5f} {'n/a':>12s} {'n/a':>9s}")
            continue
        tc = bench(getattr(_ckernels, attr), args, a.repeat)
        print(f"{name:22s} {tp:12.5f} {tc:12.5f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
