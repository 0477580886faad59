#!/usr/bin/env python3
"""Benchmark: compiled integration kernel vs the pure-Python fallback.

Runs each built-in model over a fixed horizon with both code paths and
reports steps, wall time, and steps per second.  The Field-Noyes system
is stiff (rate ratios around 1e6 across its box), so the step count is
large and the kernel speedup directly bounds how long the batch
experiments take.

Usage: python benchmarks/bench_integrator.py [--t-end-goodwin 500]
       [--t-end-fn 100] [--repeats 3]
"""

import argparse
import time

import numpy as np

from coop2 import models, sim


def run(model, x0, t_end, rtol, force_python, repeats):
    best = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        traj = sim.integrate(model, x0, t_end, rtol=rtol, force_python=force_python)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return traj, best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-end-goodwin", type=float, default=500.0)
    ap.add_argument("--t-end-fn", type=float, default=100.0)
    ap.add_argument("--rtol", type=float, default=1e-8)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not sim.HAVE_KERNELS:
        print("compiled kernels are not available; benchmarking fallback only")

    cases = [
        (
            models.goodwin(models.GoodwinParams(0.5, 0.4, 0.6, 10)),
            np.array([0.1, 0.1, 0.1]),
            args.t_end_goodwin,
        ),
        (
            models.field_noyes(models.FieldNoyesParams(0.3, 8.375e-6, 1.0, 0.2934)),
            np.array([732.2670, 9.9795, 732.2670]),
            args.t_end_fn,
        ),
    ]

    print(f"{'model':<12} {'path':<8} {'steps':>9} {'time [s]':>10} {'steps/s':>12}")
    for model, x0, t_end in cases:
        rows = []
        traj_py, dt_py = run(model, x0, t_end, args.rtol, True, args.repeats)
        rows.append(("python", traj_py.n_accepted + traj_py.n_rejected, dt_py))
        if sim.HAVE_KERNELS:
            traj_c, dt_c = run(model, x0, t_end, args.rtol, False, args.repeats)
            rows.append(("kernel", traj_c.n_accepted + traj_c.n_rejected, dt_c))
            drift = np.max(
                np.abs(traj_c.states[-1] - traj_py.states[-1])
                / np.maximum(1.0, np.abs(traj_py.states[-1]))
            )
        for path, steps, dt in rows:
            print(f"{model.name:<12} {path:<8} {steps:>9} {dt:>10.4f} {steps / dt:>12.0f}")
        if sim.HAVE_KERNELS:
            print(
                f"{'':<12} speedup {dt_py / dt_c:.1f}x, final-state relative drift {drift:.2e}"
            )


if __name__ == "__main__":
    main()
