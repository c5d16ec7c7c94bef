"""Compare the compiled Bessel recurrences with the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the best wall time
of several repeats for each kernel and backend, the speed-up, and the
largest difference between the two backends.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from cpmse import _kernels_py

try:
    from cpmse import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

CASES = [
    # (kernel, order, number of arguments, argument range)
    ("sph_log_riccati", 120, 64, (0.5, 50.0)),
    ("sph_log_riccati", 2500, 4, (0.1, 30.0)),
    ("cyl_log_bessel", 64, 512, (1e-6, 20.0)),
    ("cyl_log_bessel", 400, 2048, (1e-3, 50.0)),
]


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the NumPy backend is available")
    print(f"{'kernel':<16}{'order':>6}{'npts':>6}{'python [ms]':>13}{'compiled [ms]':>15}{'speed-up':>10}{'max diff':>11}")
    for name, order, npts, (lo, hi) in CASES:
        x = np.geomspace(lo, hi, npts)
        py = getattr(_kernels_py, name)
        t_py = _best(lambda: py(order, x), args.repeat)
        if _kernels is None:
            print(f"{name:<16}{order:>6}{npts:>6}{1e3 * t_py:>13.2f}{'-':>15}{'-':>10}{'-':>11}")
            continue
        cc = getattr(_kernels, name)
        t_cc = _best(lambda: cc(order, x), args.repeat)
        diff = max(float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))
                   for a, b in zip(py(order, x), cc(order, x)))
        print(f"{name:<16}{order:>6}{npts:>6}{1e3 * t_py:>13.2f}{1e3 * t_cc:>15.2f}"
              f"{t_py / t_cc:>10.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
