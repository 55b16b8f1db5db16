"""Time the compiled distance kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--n 4000] [--d 32] [--centers 40] [--b 40] [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the speedup,
and whether both backends returned bitwise-identical results.
"""

import argparse
import timeit

import numpy as np

from wavefuse import _pykernels

try:
    from wavefuse import _ckernels
except ImportError:
    _ckernels = None


def cases(points, centers, b):
    """Kernel calls to time, each returning its output for the equality check."""

    def min_dists(mod):
        return mod.min_sq_dists(points, centers)

    def farthest(mod):
        mind = mod.min_sq_dists(points, centers)
        chosen = mod.farthest_first(points, mind, b)
        return np.concatenate([np.asarray(chosen, dtype=np.float64), mind])

    def updates(mod):
        mind = np.full(points.shape[0], np.inf)
        for c in range(b):
            mod.update_min_sq_dists(points, c, mind)
        return mind

    return {"min_sq_dists": min_dists, "farthest_first": farthest, "update_min_sq_dists x b": updates}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=4000, help="pool size")
    parser.add_argument("--d", type=int, default=32, help="embedding width")
    parser.add_argument("--centers", type=int, default=40, help="labeled centers")
    parser.add_argument("--b", type=int, default=40, help="batch size")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    points = rng.normal(size=(args.n, args.d))
    centers = rng.normal(size=(args.centers, args.d))
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")

    print(f"n={args.n} d={args.d} centers={args.centers} b={args.b} (best of {args.repeat})")
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  identical")
    for name, fn in cases(points, centers, args.b).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:<26}{t_py * 1e3:>12.2f}{'-':>12}{'-':>10}  -")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        same = np.array_equal(fn(_pykernels), fn(_ckernels))
        print(f"{name:<26}{t_py * 1e3:>12.2f}{t_c * 1e3:>12.2f}{t_py / t_c:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
