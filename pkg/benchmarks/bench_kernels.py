"""Compiled vs pure-Python kernel timings.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--rows R]
"""
import argparse
import timeit

import numpy as np

from dyadic_bump import _backend
from dyadic_bump.young import logbump, loglogbump


def cases(rows):
    rng = np.random.default_rng(0)
    vals = np.ascontiguousarray(rng.exponential(size=(rows, 16)) ** 2)
    A, B = logbump(2.0, 1.0), loglogbump(3.0, 0.5)
    contrib = np.ascontiguousarray(rng.standard_normal((1 << 12, 12)))
    return {
        "luxemburg_rows logbump(2,1)":
            lambda k: k.luxemburg_rows(vals, None, *A.params, A.unit_inverse()),
        "luxemburg_rows_dual logbump(2,1)":
            lambda k: k.luxemburg_rows_dual(vals, None, *A.params, A.complement().unit_inverse()),
        "luxemburg_rows_dual loglogbump(3,.5)":
            lambda k: k.luxemburg_rows_dual(vals, None, *B.params, B.complement().unit_inverse()),
        "window_max_abs 4096x12": lambda k: k.window_max_abs(contrib),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rows", type=int, default=4096)
    args = ap.parse_args()
    names = _backend.available()
    if "compiled" not in names:
        print("compiled extension not built; only the python backend is timed")
    print(f"{'kernel':40s}" + "".join(f"{n:>14s}" for n in names) + "   speedup")
    for label, fn in cases(args.rows).items():
        times = {}
        out = {}
        for n in names:
            k = _backend.get(n)
            out[n] = np.asarray(fn(k))
            times[n] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        if len(out) == 2:
            np.testing.assert_allclose(out["python"], out["compiled"], rtol=1e-10)
        row = f"{label:40s}" + "".join(f"{times[n] * 1e3:12.2f}ms" for n in names)
        if "compiled" in times:
            row += f"   {times['python'] / times['compiled']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
