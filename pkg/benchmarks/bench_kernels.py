"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are called in the same process through the ``backend``
argument, so the environment flag does not need to be toggled.  The first
numba call (compilation or cache load) is timed separately.
"""
import argparse
import time

import numpy as np

from secrecy_regions import _kernels
from secrecy_regions.channel import AuxiliaryChain, BroadcastWiretapChannel, bsc
from secrecy_regions.codesim import CodebookSpec, build_codebook, estimate_error, exact_equivocation


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def typical_case(paths, trials, n=12, seed=0):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(paths, n))
    msg = np.arange(paths) // 2
    ys = rng.integers(0, 2, size=(trials, n))
    cond = bsc(0.05).matrix
    return codes, msg, int(msg.max()) + 1, ys, cond, 0.1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"default backend: {_kernels.BACKEND}")
    if _kernels.BACKEND != "numba":
        print("numba unavailable or disabled; only the numpy timings are meaningful")

    cases = []
    for paths, trials in [(64, 20_000), (512, 20_000), (4096, 2_000)]:
        a = typical_case(paths, trials)
        cases.append((f"typical_mask paths={paths} trials={trials}",
                      lambda a=a, b=None: _kernels.typical_mask(*a, backend=b)))
    rng = np.random.default_rng(1)
    for paths, n in [(256, 10), (64, 14)]:
        codes = rng.integers(0, 2, size=(paths, n))
        W = bsc(0.2).matrix
        cases.append((f"likelihoods paths={paths} n={n}",
                      lambda c=codes, W=W, b=None: _kernels.likelihoods(c, W, backend=b)))

    print(f"{'kernel':<40} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for name, fn in cases:
        t0 = time.perf_counter()
        fn(b="numba")
        first = time.perf_counter() - t0
        tn = best_of(lambda: fn(b="numpy"), args.repeat)
        tb = best_of(lambda: fn(b="numba"), args.repeat)
        print(f"{name:<40} {tn:10.4f} {tb:10.4f} {tn / tb:8.1f}   (first numba call {first:.3f} s)")

    # end to end: one wiretap codebook at n=12
    bc = BroadcastWiretapChannel.from_product([bsc(0.01)], bsc(0.3))
    cb = build_codebook(CodebookSpec(n=12, message_rates=(0.0, 0.4), chain=AuxiliaryChain((np.full(2, 0.5),)),
                                     seed=0), bc)
    for label, fn in [
        ("estimate_error 20k trials", lambda b: estimate_error(cb, None, 20_000, np.random.default_rng(0), backend=b)),
        ("exact_equivocation", lambda b: exact_equivocation(cb, backend=b)),
    ]:
        fn("numba")
        tn = best_of(lambda: fn("numpy"), max(1, args.repeat // 2))
        tb = best_of(lambda: fn("numba"), max(1, args.repeat // 2))
        print(f"{label:<40} {tn:10.4f} {tb:10.4f} {tn / tb:8.1f}")


if __name__ == "__main__":
    main()
