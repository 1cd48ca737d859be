"""Time the numba and numpy paths of each kernel at engine-sized and bulk inputs.

    python benchmarks/bench_kernels.py [--repeat 200]

Engine-sized calls are what the simulator issues every epoch (a few dozen
events); bulk calls are what offline analysis issues (decision grids over
a fine location-speed mesh). JIT compilation is excluded by a warm-up call.
"""

import argparse
import timeit

import numpy as np

from vecdt import kernels


def cases(rng):
    for n in (30, 100_000):
        x = rng.uniform(0, 200, n)
        v = rng.uniform(-25, 25, n)
        yield "status_counts", n, lambda nb, x=x, v=v: kernels.status_counts(x, v, 0, 200, 5, 25, 5, 5, use_numba=nb)
        yield "delivery_mask", n, lambda nb, x=x, v=v: kernels.delivery_mask(x, v, 90, 12, 0.6, -0.8, -40, use_numba=nb)
        offs = rng.integers(0, 10, n)
        viol = rng.choice([0.0, 1.0, 10.0, 11.0], n)
        yield "slot_mean_cost", n, lambda nb, o=offs, w=viol: kernels.slot_mean_cost(o, w, 10, use_numba=nb)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not kernels._HAVE_NUMBA:
        print("numba is not installed; only the numpy path can be timed")
    print(f"{'kernel':<16}{'n':>8}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, n, fn in cases(np.random.default_rng(0)):
        reps = args.repeat if n < 1000 else max(args.repeat // 20, 3)
        t_np = min(timeit.repeat(lambda: fn(False), number=reps, repeat=3)) / reps * 1e6
        if kernels._HAVE_NUMBA:
            fn(True)  # compile
            t_nb = min(timeit.repeat(lambda: fn(True), number=reps, repeat=3)) / reps * 1e6
            print(f"{name:<16}{n:>8}{t_np:>12.1f}{t_nb:>12.1f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<16}{n:>8}{t_np:>12.1f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
