"""Time the compiled kernels against the pure-Python fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints one row per
kernel and case with the mean time of each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from connprob import _fallback

try:
    from connprob import _kernels
except ImportError:  # extension not built
    _kernels = None

# (lam1, lam2, b1^2, b2^2, y, degree)
CASES = {
    "small": (1.5, 0.8, 0.3, 0.1, 4.0, 60),
    "medium": (2.0, 0.6, 4.0, 1.0, 25.0, 200),
    "large": (3.0, 0.55, 16.0, 9.0, 100.0, 600),
}


def calls(mod, case):
    l1, l2, B1, B2, y, w = case
    a1, a2 = 1 / (2 * l1), 1 / (2 * l2)
    values = np.random.default_rng(0).standard_normal(10_000)
    return {
        "coeff_series": lambda: mod.coeff_series(l1, l2, B1, B2, w),
        "series_scan": lambda: mod.series_scan(a1, a2, B1, B2, y, w),
        "series_mp(256 bits)": lambda: mod.series_mp(a1, a2, B1, B2, y, w, 256),
        "neumaier_sum(1e4)": lambda: mod.neumaier_sum(values),
    }


def mean_time(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if _kernels is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<22}{'case':<8}{'python s':>12}{'compiled s':>12}{'speed-up':>10}")
    for name, case in CASES.items():
        py = calls(_fallback, case)
        cy = calls(_kernels, case) if _kernels else {}
        for kernel, fn in py.items():
            t_py = mean_time(fn, args.repeat)
            if kernel in cy:
                t_cy = mean_time(cy[kernel], args.repeat)
                print(f"{kernel:<22}{name:<8}{t_py:>12.2e}{t_cy:>12.2e}{t_py / t_cy:>9.1f}x")
            else:
                print(f"{kernel:<22}{name:<8}{t_py:>12.2e}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
