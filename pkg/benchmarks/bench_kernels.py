"""Compiled kernels vs the numpy/LAPACK fallback (and the pure-Python Thomas loop).

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 101 801 6401]

Prints best-of-``repeat`` timings for one assembly + solve per phase size, and
for a short coupled run with each backend.
"""
import argparse
import time

import numpy as np

from stefanbake import kernels
from stefanbake._pykernels import thomas_reference
from stefanbake.front import CouplingConfig, run
from stefanbake.verify import random_admissible_setup


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_case(backend, n):
    rng = np.random.default_rng(0)
    u_old = rng.standard_normal(n)

    def step():
        lo, d, up, r = backend.assemble_phase(n, 1.0 / (n - 1), 0.0, 0.5, 0.501, 1.0, 1.0, 1e-3, -0.3, 0.0, 1.0,
                                              u_old, True, True)
        backend.solve_tridiagonal(lo, d, up, r)

    return step


def thomas_case(n):
    backend = kernels.get_backend("numpy")
    lo, d, up, r = backend.assemble_phase(n, 1.0 / (n - 1), 0.0, 0.5, 0.501, 1.0, 1.0, 1e-3, -0.3, 0.0, 1.0,
                                          np.ones(n), True, True)
    return lambda: thomas_reference(lo, d, up, r)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[101, 801, 6401])
    ap.add_argument("--run-nodes", type=int, default=201)
    args = ap.parse_args()
    names = sorted(kernels.BACKENDS)
    print(f"backends available: {', '.join(names)}")
    print(f"{'n':>7s} " + " ".join(f"{b:>12s}" for b in names) + f" {'py-thomas':>12s}   (seconds per assemble+solve)")
    for n in args.sizes:
        row = [best_of(kernel_case(kernels.BACKENDS[b], n), args.repeat * 20) for b in names]
        row.append(best_of(thomas_case(n), args.repeat))
        print(f"{n:7d} " + " ".join(f"{t:12.3e}" for t in row))

    setup = random_admissible_setup(3, horizon=0.05)
    cfg = CouplingConfig(n_l=args.run_nodes, n_a=args.run_nodes, dt=5e-4)
    finals = {}
    print(f"\ncoupled run, {args.run_nodes} nodes per phase, {int(round(0.05 / 5e-4))} steps:")
    for b in names:
        prev = kernels.set_backend(b)
        try:
            t = best_of(lambda: finals.__setitem__(b, run(setup, cfg).report.final_sim_state.e), max(1, args.repeat // 2))
        finally:
            kernels.set_backend(prev)
        print(f"  {b:8s} {t:8.3f} s   final e = {finals[b]:.15f}")
    if len(finals) > 1:
        vals = list(finals.values())
        print(f"  max backend disagreement in final e: {max(vals) - min(vals):.2e}")


if __name__ == "__main__":
    main()
