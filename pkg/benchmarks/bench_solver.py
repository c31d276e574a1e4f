"""Benchmark the compiled decoding kernel against the numpy fallback.

Runs seeded decode instances on the (q=31, s=7) design through both
backends, checks they agree, and reports timings.

Usage: python benchmarks/bench_solver.py [--trials N] [--q Q] [--s S]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pooldesign import DesignParams, construct_design
from pooldesign import _kernels_py
from pooldesign.solver import STEP_SAFETY, _power_norm

try:
    from pooldesign import _kernels
except ImportError:
    _kernels = None


def make_instance(design, rng, sparsity, corrupted):
    x = np.zeros(design.n)
    support = rng.choice(design.n, sparsity, replace=False)
    x[support] = rng.poisson(100, sparsity) + 1
    y = design.forward(x)
    if corrupted:
        hit = rng.choice(design.m, corrupted, replace=False)
        y[hit] = rng.uniform(0, y.max(), corrupted)
    return y


def run(kernel, design, instances, step):
    times = []
    objectives = []
    for y in instances:
        t0 = time.perf_counter()
        _, obj, _, iters, status, _ = kernel(
            design.row_index,
            design.scale,
            y,
            step,
            step,
            max(1e-8, 1e-8 * np.abs(y).sum()),
            2.0 * np.abs(y).sum(),
            design.scale * design.column_weight,
            50_000,
            64,
        )
        times.append(time.perf_counter() - t0)
        objectives.append(obj)
    return np.array(times), np.array(objectives)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--q", type=int, default=31)
    parser.add_argument("--s", type=int, default=7)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    design = construct_design(DesignParams(q=args.q, s=args.s))
    rng = np.random.default_rng(args.seed)
    instances = [
        make_instance(design, rng, args.s, corrupted=(t % 3 > 0) * 3)
        for t in range(args.trials)
    ]
    step = STEP_SAFETY / _power_norm(design.forward, design.adjoint, design.n)

    py_times, py_obj = run(_kernels_py.nnlad_uniform, design, instances, step)
    print(
        f"python fallback : mean {py_times.mean() * 1e3:8.2f} ms  "
        f"median {np.median(py_times) * 1e3:8.2f} ms  "
        f"total {py_times.sum():6.2f} s"
    )
    if _kernels is None:
        print("compiled kernel : not built (pip install -e . rebuilds it)")
        return
    c_times, c_obj = run(_kernels.nnlad_uniform, design, instances, step)
    print(
        f"compiled kernel : mean {c_times.mean() * 1e3:8.2f} ms  "
        f"median {np.median(c_times) * 1e3:8.2f} ms  "
        f"total {c_times.sum():6.2f} s"
    )
    print(f"speedup         : {py_times.sum() / c_times.sum():.1f}x")
    print(f"max |objective difference|: {np.abs(py_obj - c_obj).max():.3e}")


if __name__ == "__main__":
    main()
