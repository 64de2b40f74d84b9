"""Compare the compiled and pure eigensolver kernels (and LAPACK, for scale).

Run:  python benchmarks/bench_backends.py [--sizes 16,32,64,128,256] [--repeats 5]
"""

import argparse
import time

import numpy as np

from scsp import _kernels_py

try:
    from scsp import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,32,64,128,256")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    print(f"{'n':>5} {'compiled':>12} {'pure':>12} {'speedup':>9} {'numpy.eigh':>12}")
    for n in sizes:
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        tol = 1e-10 * max(1.0, float(np.linalg.norm(a)))

        t_pure = _time(lambda: _kernels_py.jacobi_eigh(a, tol, 60), args.repeats)
        t_lapack = _time(lambda: np.linalg.eigh(a), args.repeats)
        if _kernels is not None:
            t_comp = _time(lambda: _kernels.jacobi_eigh(a, tol, 60), args.repeats)
            d_c, _ = _kernels.jacobi_eigh(a, tol, 60)
            d_p, _ = _kernels_py.jacobi_eigh(a, tol, 60)
            assert np.allclose(np.sort(d_c), np.sort(d_p), atol=1e-9)
            print(
                f"{n:>5} {t_comp * 1e3:>10.2f}ms {t_pure * 1e3:>10.2f}ms "
                f"{t_pure / t_comp:>8.1f}x {t_lapack * 1e3:>10.2f}ms"
            )
        else:
            print(
                f"{n:>5} {'(not built)':>12} {t_pure * 1e3:>10.2f}ms "
                f"{'-':>9} {t_lapack * 1e3:>10.2f}ms"
            )
    if _kernels is None:
        print("\ncompiled kernel not built; install with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
