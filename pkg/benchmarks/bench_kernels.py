"""Compare the compiled accumulation kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each case is
timed on both backends, and the outputs are checked for bitwise equality.
"""
import argparse
import time

import numpy as np

from ergodiff import kernels
from ergodiff.averaging import ConstantTheta, Interval, avg_field
from ergodiff.dynamics import DoublingMap, Rotation
from ergodiff.observables import TrigPolynomial

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def cases():
    rng = np.random.default_rng(0)
    f = TrigPolynomial([[1], [-2], [3]], [0.5, 0.25j, -0.2])
    yield "rotation char, 4096 pts x 2000", Rotation(GOLDEN), f, rng.random((4096, 1)), 2000, None
    yield ("rotation theta, 4096 pts x 2000", Rotation(GOLDEN), f, rng.random((4096, 1)), 2000,
           ConstantTheta(phase=0.1))
    yield "doubling values, 20000 pts x 40", DoublingMap(), f, rng.random((20000, 1)), 40, None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'case':<36} {'cython s':>10} {'python s':>10} {'speedup':>8}  bitwise")
    for name, sys_, f, P, k, w in cases():
        F = Interval().folner_set(k)
        extra = (w,) if w is not None else ()
        tc, a = best_of(lambda: avg_field(sys_, F, f, P, *extra, backend="cython"), args.repeat)
        tp, b = best_of(lambda: avg_field(sys_, F, f, P, *extra, backend="python"), args.repeat)
        print(f"{name:<36} {tc:>10.4f} {tp:>10.4f} {tp / tc:>7.1f}x  {np.array_equal(a, b)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
