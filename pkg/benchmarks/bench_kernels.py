"""Time the numba and numpy tensor kernels on the sizes a sweep actually hits.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache); it is excluded.
"""
import argparse
import timeit

import numpy as np

from rmtwhiten import _kernels as kn

CASES = [
    ("third_moment_sum", (2500, 2), lambda xi: (xi,)),
    ("third_moment_sum", (100_000, 4), lambda xi: (xi,)),
    ("third_moment_sum", (100_000, 8), lambda xi: (xi,)),
]


def bench(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kn.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'shape':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, shape, make in CASES:
        a = make(rng.standard_normal(shape))
        t_np = bench(getattr(kn, name + "_numpy"), a, args.repeat)
        t_nb = bench(getattr(kn, name + "_numba"), a, args.repeat)
        print(f"{name:<18}{str(shape):<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.2f}")
    for K in (2, 4, 8):
        T, A, th = rng.standard_normal((K, K, K)), rng.standard_normal((K, K)), rng.standard_normal(K)
        for name, a in (("multilinear", (T, A)), ("contract", (T, th))):
            t_np = bench(getattr(kn, name + "_numpy"), a, args.repeat)
            t_nb = bench(getattr(kn, name + "_numba"), a, args.repeat)
            print(f"{name:<18}{f'K={K}':<16}{1e3 * t_np:>12.4f}{1e3 * t_nb:>12.4f}"
                  f"{t_np / t_nb:>9.2f}")


if __name__ == "__main__":
    main()
