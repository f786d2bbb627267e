"""Time the numba kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 7] [--sizes 200x110,1000x550,4000x2000]

Also times one full fit per backend by re-running this script in a child
process with ``HYPERFIT_BACKEND`` set, since the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hyperfit import kernels

FIT_SNIPPET = """
import time
from hyperfit import FitConfig, fit, random_ellipsoid, sample_surface, contaminate, ContaminationSpec
m = random_ellipsoid(3, seed=1)
c = contaminate(sample_surface(m, {n}, seed=2), ContaminationSpec(0.05, 0.3, seed=3))
fit(c, FitConfig(max_iters=3))  # warm-up and JIT
t0 = time.perf_counter()
r = fit(c, FitConfig())
print(time.perf_counter() - t0, r.iterations)
"""


def _best(fn, repeat):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(sizes, repeat, dim=3):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'N':>7}{'M':>7}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}  max|diff|")
    for N, M in sizes:
        X = rng.normal(size=(N, dim)) * 10
        Z = rng.normal(size=(M, dim)) * 10
        args = (X, Z, 0.5, -3.0)
        t_np = _best(lambda: kernels.estep_numpy(*args), repeat)
        t_nb = _best(lambda: kernels.estep_numba(*args), repeat)
        diff = np.max(np.abs(kernels.estep_numpy(*args)[0] - kernels.estep_numba(*args)[0]))
        print(f"{'estep':<14}{N:>7}{M:>7}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.2f}  {diff:.1e}")
        t_np = _best(lambda: kernels.sq_distances_numpy(X, Z), repeat)
        t_nb = _best(lambda: kernels.sq_distances_numba(X, Z), repeat)
        diff = np.max(np.abs(kernels.sq_distances_numpy(X, Z) - kernels.sq_distances_numba(X, Z)))
        print(f"{'sq_distances':<14}{N:>7}{M:>7}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.2f}  {diff:.1e}")


def bench_fit(n):
    print(f"\nfull fit, 3D, {n} surface points + 30% outliers")
    for backend in ("numpy", "numba"):
        env = dict(os.environ, HYPERFIT_BACKEND=backend)
        env.pop("HYPERFIT_DISABLE_NUMBA", None)
        out = subprocess.run(
            [sys.executable, "-c", FIT_SNIPPET.format(n=n)], env=env, capture_output=True, text=True, check=True
        ).stdout.split()
        print(f"  {backend:<6} {float(out[0]):8.3f} s  ({out[1]} iterations)")


def _sizes(text):
    return [tuple(int(v) for v in part.split("x")) for part in text.split(",")]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=7)
    p.add_argument("--sizes", type=_sizes, default=_sizes("200x110,1000x550,4000x2000"))
    p.add_argument("--fit-points", type=int, default=500)
    p.add_argument("--no-fit", action="store_true")
    args = p.parse_args(argv)
    if not kernels.HAS_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(args.sizes, args.repeat)
    if not args.no_fit:
        bench_fit(args.fit_points)


if __name__ == "__main__":
    main()
