"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 5]

Each kernel is run once before timing so numba compilation is excluded, and
the outputs of both backends are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from convmix import _kernels
from convmix.timeline import callhome1_params


def sweep_case(rng, n):
    starts = np.sort(rng.uniform(0, n * 2.0, n))
    ends = starts + rng.uniform(0.3, 6.0, n)
    spk = rng.integers(0, 3, n)
    return (starts, ends, spk, 3, float(ends.max()))


def emd_case(rng, n):
    return (np.sort(rng.exponential(1.0, n)), np.sort(rng.exponential(1.2, n + n // 3)))


def chain_case(rng, n):
    p = callhome1_params()
    return (rng.random(n), p.p_ind_array, p.p_markov_array, True, -1)


CASES = {"sweep": sweep_case, "emd_sorted": emd_case, "transition_chain": chain_case}


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.allclose(x, y) for x, y in zip(a, b))
    return np.allclose(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"{'kernel':<18} {'n':>8} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, make in CASES.items():
        for n in args.sizes:
            case = make(np.random.default_rng(args.seed), n)
            f_np = getattr(_kernels.numpy_impl, name)
            f_nb = getattr(_kernels.numba_impl, name)
            if not _same(f_np(*case), f_nb(*case)):
                raise SystemExit(f"{name}: backends disagree at n={n}")
            best = {}
            for label, f in (("numpy", f_np), ("numba", f_nb)):
                number = max(1, int(2e5 // n))
                t = min(timeit.repeat(lambda: f(*case), number=number, repeat=args.repeat))
                best[label] = 1e3 * t / number
            print(f"{name:<18} {n:>8} {best['numpy']:>10.3f} {best['numba']:>10.3f}"
                  f" {best['numpy'] / best['numba']:>7.1f}x")


if __name__ == "__main__":
    main()
