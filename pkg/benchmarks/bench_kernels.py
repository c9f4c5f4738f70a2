"""Compare the numba and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 2048]

Each kernel is called once untimed so numba compilation is excluded, then
timed with ``timeit`` (best of ``--repeat``). The outputs of both backends
are checked for agreement before anything is reported.
"""
import argparse
import timeit

import numpy as np

from roughshear import kernels
from roughshear._accel import HAVE_NUMBA
from roughshear.irregularity import discrete_basis


def cases(size: int, rng: np.random.Generator):
    values = rng.standard_normal(size)
    basis = discrete_basis(32, 1)
    paths = rng.standard_normal((2000, 200))
    freqs = np.arange(1.0, 17.0)
    yield ("interval_deviations p=2", "interval_deviations", (values, basis, 2.0))
    yield ("interval_deviations p=1", "interval_deviations", (values, basis, 1.0))
    yield ("affine_window_rss", "affine_window_rss", (values, 24))
    yield ("path_phase_integrals", "path_phase_integrals", (paths, 0.1, 0.005, freqs))


def best_time(func, args, repeat: int) -> float:
    func(*args)
    return min(timeit.repeat(lambda: func(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=2048, help="samples per field")
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba backend unavailable (missing or disabled); timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for label, name, call_args in cases(args.size, rng):
        slow = getattr(kernels, f"{name}_numpy")
        t_numpy = best_time(slow, call_args, args.repeat)
        if HAVE_NUMBA:
            fast = getattr(kernels, f"{name}_numba")
            fast_out, slow_out = fast(*call_args), slow(*call_args)
            if not isinstance(fast_out, tuple):
                fast_out, slow_out = (fast_out,), (slow_out,)
            for a, b in zip(fast_out, slow_out):
                np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)
            t_numba = best_time(fast, call_args, args.repeat)
            print(f"{label:<26}{1e3 * t_numpy:>12.2f}{1e3 * t_numba:>12.2f}"
                  f"{t_numpy / t_numba:>9.1f}x")
        else:
            print(f"{label:<26}{1e3 * t_numpy:>12.2f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
