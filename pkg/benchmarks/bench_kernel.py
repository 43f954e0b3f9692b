"""Compare the compiled and numpy Hessian accumulation kernels.

Usage::

    python3 benchmarks/bench_kernel.py [--repeat 200]

Prints per-call times for a few (antennas, blocks) shapes, the speedup,
and the largest entrywise difference between the two outputs.
"""
import argparse
import timeit

import numpy as np

from secrecy_region.kernel import _hess_py

try:
    from secrecy_region.kernel import _hesscore
except ImportError:  # extension not built
    _hesscore = None


def make_case(rng, n, nb):
    G = rng.standard_normal((nb * n, nb * n)) + 1j * rng.standard_normal((nb * n, nb * n))
    M = G @ G.conj().T + np.eye(nb * n)
    W = np.linalg.inv(M).reshape(nb, n, nb, n).transpose(0, 2, 1, 3).copy()
    offsets = np.arange(nb, dtype=np.intp) * n * n
    return W, offsets


def run(fn, W, offsets, n):
    out = np.zeros((W.shape[0] * n * n,) * 2)
    fn(W, offsets, 1.0, out, n)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>3} {'blocks':>6} {'python_us':>10} {'cython_us':>10} {'speedup':>8} {'max_diff':>9}")
    for n, nb in [(1, 3), (2, 3), (3, 3), (4, 2), (5, 3)]:
        W, offsets = make_case(rng, n, nb)
        t_py = min(timeit.repeat(lambda: run(_hess_py.accumulate_term, W, offsets, n), number=args.repeat, repeat=3))
        t_py *= 1e6 / args.repeat
        if _hesscore is None:
            print(f"{n:>3} {nb:>6} {t_py:>10.1f} {'n/a':>10} {'n/a':>8} {'n/a':>9}")
            continue
        t_cy = min(timeit.repeat(lambda: run(_hesscore.accumulate_term, W, offsets, n), number=args.repeat, repeat=3))
        t_cy *= 1e6 / args.repeat
        diff = np.abs(run(_hess_py.accumulate_term, W, offsets, n) - run(_hesscore.accumulate_term, W, offsets, n)).max()
        print(f"{n:>3} {nb:>6} {t_py:>10.1f} {t_cy:>10.1f} {t_py / t_cy:>8.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
