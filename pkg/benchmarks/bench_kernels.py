"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--nodes 257] [--repeat 5]

Each row reports the best of ``--repeat`` wall-clock timings per backend and
the speedup. The full-solve row swaps the dispatch table in
``fastreact.kernels`` so the same solver code runs on either backend.
"""

import argparse
import contextlib
import timeit

import numpy as np

from fastreact import _fallback, kernels
from fastreact.mesh import build_mesh
from fastreact.profiles import preset_initial_pair
from fastreact.solver import ProblemSpec, solve_coupled

try:
    from fastreact import _kernels
except ImportError:
    _kernels = None

NAMES = ("tridiag_factor", "tridiag_solve", "reaction_coupled", "reaction_reduced",
         "reaction_rate", "powm")


@contextlib.contextmanager
def backend(mod):
    saved = {n: getattr(kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(kernels, n, getattr(mod, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def cases(n):
    rng = np.random.default_rng(0)
    u = rng.random(n) * 2
    v = rng.random(n)
    h = 1.0 / (n - 1)
    lower = np.full(n, -0.5 / h**2)
    upper = lower.copy()
    diag = np.full(n, 1.0 + 1.0 / h**2)

    def tri(mod):
        cp, inv = mod.tridiag_factor(lower, diag, upper)
        rhs = rng.random(n)
        return lambda: mod.tridiag_solve(lower, cp, inv, rhs)

    mesh = build_mesh(1, (0, 1), n, "neumann")
    spec = ProblemSpec(mesh, 2.5, 1e3, 0.05, preset_initial_pair("two_blocks_1d", mesh))

    def full(mod):
        def run():
            with backend(mod):
                solve_coupled(spec)
        return run

    return [
        ("tridiag_solve", tri, 200),
        ("reaction_coupled", lambda mod: lambda: mod.reaction_coupled(u, v, 1e3, 2.5, 1e-4), 200),
        ("reaction_rate", lambda mod: lambda: mod.reaction_rate(u, v, v * 0.1, 1e3, 2.5), 200),
        (f"solve_coupled T={spec.T} ({int(round(spec.T / spec.dt))} steps)", full, 1),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=257)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"nodes={args.nodes}  best of {args.repeat}")
    print(f"{'kernel':<40}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name, make, number in cases(args.nodes):
        fast = best(make(_kernels), args.repeat, number)
        slow = best(make(_fallback), args.repeat, number)
        print(f"{name:<40}{fast:>12.3e}{slow:>12.3e}{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
