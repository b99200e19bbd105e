"""Timing comparison of the compiled and pure-NumPy recursion kernels.

Runs the Kalman and Laplace smoother kernels on matched random problems at a
few sizes, reports wall time per call for both implementations, and checks
that the outputs agree.  Usage:

    python benchmarks/bench_backends.py [--repeats R]
"""
import argparse
import time

import numpy as np

from dbmt._backend import _py

try:
    from dbmt._backend import _kernels
except ImportError:
    _kernels = None

SIZES = [(50, 64), (200, 300), (1000, 300)]


def _kalman_problem(rng, N, J):
    z = rng.standard_normal((N, J)) + 1j * rng.standard_normal((N, J))
    ynorm2 = np.abs(z ** 2).sum(axis=1) + rng.random(N)
    q = rng.random(J) + 0.1
    return dict(z=z, ynorm2=ynorm2, W=J, alpha=0.9, q=q, sigma2=1.0,
                x0=np.zeros(J, dtype=complex), p0=q.copy())


def _laplace_problem(rng, N, J):
    psi = rng.standard_normal((N, J)).cumsum(axis=0) * 0.1
    r = rng.random(J) * 0.05 + 0.01
    return dict(psi=psi, theta=0.95, r=r, nu=1.0,
                s0=psi[0].copy(), w0=r.copy())


def _time(fn, kwargs, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(**kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    header = f"{'kernel':<8} {'N':>5} {'J':>4} {'numpy [ms]':>11} " \
             f"{'cython [ms]':>12} {'speedup':>8} {'max |diff|':>11}"
    print(header)
    print("-" * len(header))
    for name, make, key in [("kalman", _kalman_problem, "xs"),
                            ("laplace", _laplace_problem, "ss")]:
        for N, J in SIZES:
            kwargs = make(rng, N, J)
            t_py, out_py = _time(getattr(_py, f"{name}_smooth_diag"),
                                 kwargs, args.repeats)
            t_cy, out_cy = _time(getattr(_kernels, f"{name}_smooth_diag"),
                                 kwargs, args.repeats)
            diff = float(np.max(np.abs(np.asarray(out_py[key])
                                       - np.asarray(out_cy[key]))))
            print(f"{name:<8} {N:>5} {J:>4} {1e3 * t_py:>11.3f} "
                  f"{1e3 * t_cy:>12.3f} {t_py / t_cy:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
