"""Compare the compiled cone kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat R] [--socs S] [--dim D]

Times each kernel on a random point of R+^l x Q^D x ... x Q^D and one full
solve of a desk-scale subproblem with either backend, and checks that both
backends agree numerically.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from mdsdelivery.conic import _kernels_py, solve

try:
    from mdsdelivery.conic import _kernels
except ImportError:  # extension not built
    _kernels = None


def interior_point(rng, l, offs):
    x = rng.uniform(0.5, 2.0, offs[-1])
    for a, b in zip(offs[:-1], offs[1:]):
        x[a] = np.linalg.norm(x[a + 1:b]) + rng.uniform(0.5, 2.0)
    return x


def kernel_cases(rng, l, socs, dim, ncols):
    offs = np.array([l + i * dim for i in range(socs + 1)], dtype=np.int64)
    s, z = interior_point(rng, l, offs), interior_point(rng, l, offs)
    v = rng.normal(size=offs[-1])
    G = rng.normal(size=(offs[-1], ncols))
    return offs, s, z, v, G


def run_kernels(K, offs, s, z, v, G, l):
    d, beta, wbar, lmbda = K.nt_scaling(s, z, l, offs)
    return {
        "nt_scaling": lambda: K.nt_scaling(s, z, l, offs),
        "scale": lambda: K.scale(d, beta, wbar, l, offs, v, True),
        "scale_rows": lambda: K.scale_rows(d, beta, wbar, l, offs, G, True),
        "jprod": lambda: K.jprod(lmbda, v, l, offs),
        "jdiv": lambda: K.jdiv(lmbda, v, l, offs),
        "max_step": lambda: K.max_step(lmbda, v, l, offs),
        "min_eig": lambda: K.min_eig(v, l, offs),
    }


def desk_program():
    from mdsdelivery.caching import probc_place
    from mdsdelivery.network import Library, RadioParams, make_scenario
    from mdsdelivery.optimizer import initial_plan, InitPolicy, update_Z
    from mdsdelivery.sca import R2State, build_r2

    lib = Library()
    sc = make_scenario(RadioParams(), lib, seed=0)
    cache = probc_place(lib, 3, 0.2, seed=0)
    plan = initial_plan(sc, cache, InitPolicy(), False, None)
    prog, _ = build_r2(sc, cache, R2State(plan.U, plan.V, plan.t, update_Z(plan.E)), 0.1)
    return prog


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--linear", type=int, default=40)
    ap.add_argument("--socs", type=int, default=30)
    ap.add_argument("--dim", type=int, default=12)
    ap.add_argument("--cols", type=int, default=140)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; only the Python backend is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    offs, s, z, v, G = kernel_cases(rng, args.linear, args.socs, args.dim, args.cols)
    fast = run_kernels(_kernels, offs, s, z, v, G, args.linear)
    slow = run_kernels(_kernels_py, offs, s, z, v, G, args.linear)
    print(f"{'kernel':<12}{'compiled us':>14}{'python us':>12}{'speedup':>10}{'max diff':>12}")
    for name in fast:
        tf = min(timeit.repeat(fast[name], number=args.repeat, repeat=3)) / args.repeat * 1e6
        ts = min(timeit.repeat(slow[name], number=args.repeat, repeat=3)) / args.repeat * 1e6
        a, b = fast[name](), slow[name]()
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y))))
                   for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
        print(f"{name:<12}{tf:>14.2f}{ts:>12.2f}{ts / tf:>10.1f}{diff:>12.2e}")

    prog = desk_program()
    res = {}
    for label, K in (("compiled", _kernels), ("python", _kernels_py)):
        t = min(timeit.repeat(lambda: solve(prog, kernels=K), number=3, repeat=3)) / 3
        res[label] = solve(prog, kernels=K)
        print(f"full solve ({prog.n} vars) with {label} kernels: {t * 1e3:.1f} ms, "
              f"{res[label].iterations} iterations, status {res[label].status}")
    print(f"objective difference between backends: {abs(res['compiled'].objective - res['python'].objective):.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
