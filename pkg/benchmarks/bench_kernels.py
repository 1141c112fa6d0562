"""Compare the numba and numpy forms of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both forms are called on the same inputs, the outputs are checked for
agreement, and the best wall time of each is printed. The first numba call
is timed separately so compilation (or cache load) cost stays visible.
With CPEVENTS_DISABLE_NUMBA=1 the loop forms run uncompiled.
"""
import argparse
import time

import numpy as np

from cpevents import _kernels


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def segneigh_inputs(n, rng):
    x = np.r_[rng.normal(100, 5, n // 2), rng.normal(80, 5, n - n // 2)]
    x = x - x.mean()
    c1 = np.r_[0.0, np.cumsum(x)]
    c2 = np.r_[0.0, np.cumsum(x * x)]
    return c1, c2


def css_inputs(n, rng):
    e = rng.normal(size=n + 2)
    z = e[2:] + 0.4 * e[1:-1] - 0.2 * e[:-2]
    for t in range(1, n):
        z[t] += 0.5 * z[t - 1]
    return z, np.array([0.5]), np.array([0.4, -0.2])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; the loop forms run as plain python")

    cases = []
    for n in (120, 365, 730):
        c1, c2 = segneigh_inputs(n, rng)
        cases.append((f"segneigh n={n} kmax=10", _kernels.segneigh_loops, _kernels.segneigh_numpy, (c1, c2, 10)))
    for n in (100, 365, 2000):
        cases.append((f"css n={n} p=1 q=2", _kernels.css_loops, _kernels.css_numpy, css_inputs(n, rng)))

    loop_name = "numba" if _kernels.HAVE_NUMBA else "python"
    print(f"{'kernel':<28}{loop_name + ' first':>13}{loop_name:>12}{'numpy':>12}{'speedup':>10}")
    for name, loops, vec, inputs in cases:
        t0 = time.perf_counter()
        first = loops(*inputs)
        t_first = time.perf_counter() - t0
        t_loop, a = best_of(loops, inputs, args.repeat)
        t_vec, b = best_of(vec, inputs, args.repeat)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-6)
        for x, y in zip(first, a):
            np.testing.assert_array_equal(x, y)
        print(f"{name:<28}{t_first * 1e3:>11.2f}ms{t_loop * 1e3:>10.3f}ms{t_vec * 1e3:>10.3f}ms"
              f"{t_vec / t_loop:>9.1f}x")


if __name__ == "__main__":
    main()
