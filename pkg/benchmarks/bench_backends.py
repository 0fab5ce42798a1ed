"""Time the compiled kernels against the pure-numpy fallback.

Runs the same workload twice in subprocesses, once with GN3_NUMBA=1 and
once with GN3_NUMBA=0, and prints a small table.  Workloads: repeated
tridiagonal solves at the production grid size, array resolvent evaluation,
and a short full simulation of the smooth reference scenario.

Usage: python benchmarks/bench_backends.py
"""

from __future__ import annotations

import json
import os
import subprocess
import sys

CHILD_CODE = r"""
import json
import time

import numpy as np

from gn3phase import kernels
from gn3phase.backend import NUMBA_ENABLED
from gn3phase.experiments import get_scenario
from gn3phase.grid import helmholtz_tridiag, make_grid
from gn3phase.monotone import DoubleWell, Logarithmic, resolvent
from gn3phase.solver import simulate


def timed(fn, repeat=3):
    fn()  # warm-up (includes jit compilation on the compiled path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


grid = make_grid(1.0, 257)
lower, diag, upper = helmholtz_tridiag(grid, 1.0, 1e-3)
rhs = np.cos(np.pi * grid.x)


def bench_thomas():
    for _ in range(2000):
        kernels.thomas_solve(lower, diag, upper, rhs)


points = np.linspace(-3.0, 3.0, 100_000)


def bench_cubic():
    resolvent(DoubleWell(1.0), 1e-3, points)


log_points = np.linspace(-0.999, 0.999, 100_000)


def bench_log():
    resolvent(Logarithmic(2.0, 1.0), 1e-3, log_points)


scenario = get_scenario("s1_smooth", grid_n=257, tau=1e-3)
run_grid = scenario.make_grid()
data = scenario.problem_data(0.25, run_grid)


def bench_simulate():
    simulate(data, run_grid, scenario.tau, 200, store=False)


results = {
    "backend": "numba" if NUMBA_ENABLED else "numpy",
    "thomas_2000x_n257": timed(bench_thomas),
    "resolvent_cubic_100k": timed(bench_cubic),
    "resolvent_log_100k": timed(bench_log),
    "simulate_200_steps_n257": timed(bench_simulate),
}
print(json.dumps(results))
"""


def run_child(numba_flag: str) -> dict:
    env = dict(os.environ, GN3_NUMBA=numba_flag)
    out = subprocess.run(
        [sys.executable, "-c", CHILD_CODE],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    compiled = run_child("1")
    fallback = run_child("0")
    if compiled["backend"] != "numba":
        print("warning: numba unavailable; both columns use the numpy fallback")
    keys = [k for k in compiled if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'workload':<{width}}  {'numba [s]':>12}  {'numpy [s]':>12}  {'speedup':>8}")
    for key in keys:
        a, b = compiled[key], fallback[key]
        print(f"{key:<{width}}  {a:12.4f}  {b:12.4f}  {b / a:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
