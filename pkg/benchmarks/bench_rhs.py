"""Time the hot contraction kernels: compiled path vs plain numpy.

Usage:

    python3 benchmarks/bench_rhs.py --resolution 32 --repeats 9

Run once as-is (compiled path active) and once with
IIBLAB_DISABLE_NUMBA=1 to see the fallback numbers for the full
right-hand side as well; the per-kernel table below already shows both
paths side by side within one process.
"""

import argparse
import statistics
import time

import numpy as np

from iiblab import accel
from iiblab.chern import ChernPackage
from iiblab.flow import weighted_from_metric, weighted_velocity
from iiblab.grid import TorusGrid
from iiblab.metrics import random_band_metric


def _median_ms(fn, repeats):
    fn()  # warmup: triggers jit compilation on the compiled path
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1e3)
    return statistics.median(samples)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolution", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=9)
    args = parser.parse_args()

    grid = TorusGrid(3, (0, 1), args.resolution)
    g = random_band_metric(grid, seed=0, amplitude=0.2)
    pkg = ChernPackage(grid, g)
    ginv, dg = pkg.ginv, pkg.dg
    curv, t_low = pkg.curvature, pkg.t_low

    kernels = [
        ("connection", lambda: accel.gamma_from_dg(ginv, dg),
         lambda: accel.gamma_from_dg_numpy(ginv, dg)),
        ("second-ricci", lambda: accel.second_ricci(g, ginv, curv),
         lambda: accel.second_ricci_numpy(g, ginv, curv)),
        ("torsion-square", lambda: accel.ttbar_matrix(ginv, t_low),
         lambda: accel.ttbar_matrix_numpy(ginv, t_low)),
    ]

    print(f"resolution {args.resolution}, n=3, active axes (0, 1);"
          f" compiled path {'ON' if accel.NUMBA_ACTIVE else 'OFF'}")
    print(f"{'kernel':16s} {'active ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, active, fallback in kernels:
        fast = _median_ms(active, args.repeats)
        slow = _median_ms(fallback, args.repeats)
        print(f"{name:16s} {fast:10.3f} {slow:10.3f} {slow / fast:8.2f}")

    w = weighted_from_metric(g)
    rhs_ms = _median_ms(lambda: weighted_velocity(grid, w, None), args.repeats)
    print(f"{'full rhs':16s} {rhs_ms:10.3f} {'':>10s} {'':>8s}")


if __name__ == "__main__":
    main()
