"""Compare the compiled and numpy acquisition kernels on the Adam hot loop.

    python benchmarks/bench_kernels.py --obs 50 150 250 --actions 30 --repeats 5

For each training-set size a random posterior is built, the same Adam run
is timed on both backends, and the best-of-N wall time, speedup and the
largest disagreement between the two results are printed.
"""
import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from conftest import random_problem  # noqa: E402

from mfbo import _backend  # noqa: E402
from mfbo.acquisition import AcqProblem  # noqa: E402


def bench(prob, theta0, args, name):
    kern = _backend.get(name)
    call = lambda: kern.adam_ascent(prob, theta0, args.steps, 0.01, 0.9, 0.999, 1e-8)  # noqa: E731
    best = min(timeit.repeat(call, number=1, repeat=args.repeats))
    return best, call()


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--obs", type=int, nargs="+", default=[25, 100, 250])
    p.add_argument("--actions", type=int, default=30)
    p.add_argument("--contexts", type=int, default=1)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    try:
        _backend.get("cython")
    except ImportError:
        print("compiled backend not built; run `pip install --no-build-isolation -e .` first")
        return 1

    rng = np.random.default_rng(args.seed)
    C, A = args.contexts, args.actions
    print(f"|A|={A} |C|={C} restarts={args.restarts} steps={args.steps} (best of {args.repeats})")
    print(f"{'n_obs':>6} {'python_s':>10} {'cython_s':>10} {'speedup':>8} {'max_diff':>10}")
    for n in args.obs:
        post, acts, ctx, _ = random_problem(rng, n, A, C)
        prob = AcqProblem.build(post, ctx, acts, 2.0)
        theta0 = rng.standard_normal((args.restarts, C, A))
        t_py, (th_py, v_py) = bench(prob, theta0, args, "python")
        t_cy, (th_cy, v_cy) = bench(prob, theta0, args, "cython")
        diff = max(np.abs(v_py - v_cy).max(), np.abs(th_py - th_cy).max())
        print(f"{n:>6d} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>8.1f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
