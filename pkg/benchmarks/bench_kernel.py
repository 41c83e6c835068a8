"""Time the compiled kernel against the pure-Python fallback.

    python benchmarks/bench_kernel.py [--x-end 1e3 1e4] [--repeat 3]

Both kernels get identical inputs; the script also reports the largest
difference in the returned angle and log-amplitude.
"""
import argparse
import math
import time

import numpy as np

from pruefer import _kernel_py
from pruefer.core import sample_grid

try:
    from pruefer import _kernel_cy
except ImportError:
    _kernel_cy = None

FEEDBACK = 3


def _pruefer(mod, x_end, k=0.5):
    out_x = sample_grid(x_end, 1000, 50)
    return mod.integrate_pruefer(FEEDBACK, (1.0, 0.0, 0.0), np.empty(0),
                                 np.empty(0), 0, k, math.pi / 4, x_end,
                                 1e-10, 1e-12, 0.1 * math.pi / (2 * k),
                                 1e-12, out_x)


def _rk4(mod, x_end, step=0.01):
    x = np.linspace(0.0, x_end, int(round(x_end / step)) + 1)
    mid = 0.5 * (x[:-1] + x[1:])
    vl, vm, vr = (-1.0 / (1.0 + s) for s in (x[:-1], mid, x[1:]))
    rec = np.zeros(x.size, dtype=bool)
    rec[-1] = True
    return mod.rk4_march(x, vl, vm, vr, 1.0, 0.0, 1.0, rec)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--x-end", type=float, nargs="+", default=[1e3, 1e4])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernel_cy is None:
        raise SystemExit("compiled kernel not built; run "
                         "`pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<22}{'x_end':>10}{'cython s':>12}{'python s':>12}"
          f"{'speedup':>10}{'max diff':>12}")
    for x_end in args.x_end:
        tc, rc = best_of(lambda: _pruefer(_kernel_cy, x_end), args.repeat)
        tp, rp = best_of(lambda: _pruefer(_kernel_py, x_end), 1)
        diff = max(np.max(np.abs(np.asarray(rc[key]) - np.asarray(rp[key])))
                   for key in ("theta", "logR"))
        print(f"{'feedback integrate':<22}{x_end:>10.0e}{tc:>12.4f}"
              f"{tp:>12.4f}{tp / tc:>10.1f}{diff:>12.1e}")
        tc, rc = best_of(lambda: _rk4(_kernel_cy, x_end), args.repeat)
        tp, rp = best_of(lambda: _rk4(_kernel_py, x_end), 1)
        diff = abs(float(rc[0][-1]) - float(rp[0][-1]))
        print(f"{'oracle rk4':<22}{x_end:>10.0e}{tc:>12.4f}{tp:>12.4f}"
              f"{tp / tc:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
