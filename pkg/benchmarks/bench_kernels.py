"""Benchmark the compiled kernels against the numpy fallback.

Two workloads:

* raw kernel timings (values / gradients / weighted Gram) on packed
  spectral-radius programs of growing size, averaged over many calls;
* one end-to-end barrier solve per backend on the largest instance.

Usage::

    python benchmarks/bench_kernels.py [--sizes 4 8 16 24] [--repeat 200]
"""

import argparse
import math
import time

import numpy as np

from llcp import kernels
from llcp.barrier import SolverSettings, solve
from llcp.canonicalize import graph_pf_eigenvalue
from llcp.standard_form import AffineForm, ProgramBuilder


def spectral_radius_program(n, seed=0):
    """minimize the spectral-radius bound of an n x n positive matrix
    whose entries are free up to a product-equals-one normalization."""
    rng = np.random.default_rng(seed)
    b = ProgramBuilder()
    coords = [
        [AffineForm.coordinate(b.new_coord(f"x[{i},{j}]", "variable"))
         for j in range(n)]
        for i in range(n)
    ]
    t, _ = graph_pf_eigenvalue(b, coords)
    total = AffineForm()
    for row in coords:
        for form in row:
            total = total.plus(form)
    offset = float(rng.uniform(-0.2, 0.2))
    b.add_equality(total.shifted(offset), "normalization")
    b.set_objective(t)
    return b.finalize()


def time_kernels(program, backend, repeat):
    pack = program.packed
    rng = np.random.default_rng(1)
    u = rng.uniform(-0.5, 0.5, pack.n)
    timings = {}

    start = time.perf_counter()
    for _ in range(repeat):
        h, e = backend.constraint_values(pack, u, kernels.EXP_GUARD)
    timings["values"] = (time.perf_counter() - start) / repeat

    start = time.perf_counter()
    for _ in range(repeat):
        grads = backend.constraint_grads(pack, u, e)
    timings["grads"] = (time.perf_counter() - start) / repeat

    w = rng.uniform(0.1, 1.0, pack.t)
    start = time.perf_counter()
    for _ in range(repeat):
        backend.scaled_gram(pack, w)
    timings["gram"] = (time.perf_counter() - start) / repeat
    return timings


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16, 24])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    backends = [("python", kernels.get_backend("python"))]
    if kernels.has_compiled():
        backends.append(("compiled", kernels.get_backend("compiled")))
    else:
        print("compiled kernels not built; timing the fallback only")

    header = f"{'n':>4} {'coords':>7} {'terms':>6}"
    for name, _ in backends:
        for op in ("values", "grads", "gram"):
            header += f" {name[:4] + ':' + op:>14}"
    print(header)
    for n in args.sizes:
        program = spectral_radius_program(n)
        row = f"{n:>4} {program.n:>7} {program.packed.t:>6}"
        for _, backend in backends:
            t = time_kernels(program, backend, args.repeat)
            for op in ("values", "grads", "gram"):
                row += f" {t[op] * 1e6:>12.1f}us"
        print(row)

    n = args.sizes[-1]
    program = spectral_radius_program(n)
    print(f"\nfull solve, n = {n} ({program.n} coordinates):")
    for name, _ in backends:
        start = time.perf_counter()
        result = solve(program, SolverSettings(backend=name))
        elapsed = time.perf_counter() - start
        print(
            f"  {name:>8}: {elapsed:.3f}s  status={result.status.value} "
            f"value={math.exp(result.value):.6f} newton={result.newton_steps}"
        )


if __name__ == "__main__":
    main()
