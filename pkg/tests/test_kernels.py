"""Compiled kernels against dense linear algebra and the fallback backend."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gn3phase import kernels
from gn3phase.backend import NUMBA_ENABLED


def random_dd_system(rng, n):
    lower = rng.uniform(-1.0, 1.0, n)
    upper = rng.uniform(-1.0, 1.0, n)
    lower[0] = upper[-1] = 0.0
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.5, 2.0, n)
    rhs = rng.standard_normal(n)
    return lower, diag, upper, rhs


def dense_from_bands(lower, diag, upper):
    n = diag.size
    mat = np.diag(diag)
    mat += np.diag(lower[1:], -1)
    mat += np.diag(upper[:-1], 1)
    return mat


class TestThomas:
    @pytest.mark.parametrize("n", [3, 7, 64, 257])
    def test_matches_dense_solve(self, n):
        rng = np.random.default_rng(n)
        lower, diag, upper, rhs = random_dd_system(rng, n)
        x = kernels.thomas_solve(lower, diag, upper, rhs)
        expected = np.linalg.solve(dense_from_bands(lower, diag, upper), rhs)
        assert np.max(np.abs(x - expected)) < 1e-12

    def test_apply_matches_dense_matvec(self):
        rng = np.random.default_rng(99)
        lower, diag, upper, _ = random_dd_system(rng, 31)
        z = rng.standard_normal(31)
        out = kernels.tridiag_apply(lower, diag, upper, z)
        expected = dense_from_bands(lower, diag, upper) @ z
        assert np.max(np.abs(out - expected)) < 1e-13


def bisect(fn, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestResolventKernels:
    def test_cubic_against_bisection(self):
        c = 0.7
        s = np.linspace(-4.0, 4.0, 41)
        r = kernels.resolvent_cubic(s, c)
        for sk, rk in zip(s, r):
            if sk == 0.0:
                assert rk == 0.0
                continue
            lo, hi = (0.0, sk) if sk > 0 else (sk, 0.0)
            oracle = bisect(lambda t: t + c * t**3 - sk, lo, hi)
            assert rk == pytest.approx(oracle, abs=1e-11)

    def test_log_against_bisection(self):
        e = 0.05
        s = np.linspace(-1.4, 1.4, 29)
        r = kernels.resolvent_log(s, e)
        for sk, rk in zip(s, r):
            if sk == 0.0:
                assert rk == 0.0
                continue
            lo, hi = (0.0, 1.0 - 1e-15) if sk > 0 else (-1.0 + 1e-15, 0.0)
            oracle = bisect(lambda t: t + e * np.log((1 + t) / (1 - t)) - sk, lo, hi)
            assert rk == pytest.approx(oracle, abs=1e-10)

    def test_log_clamps_inside_open_interval(self):
        r = kernels.resolvent_log(np.array([50.0, -50.0]), 1e-6)
        assert np.all(np.abs(r) < 1.0)
        assert np.all(np.abs(r) >= 1.0 - 1e-13)


class TestFusedCubicNewton:
    def test_matches_generic_inner_solve(self):
        from gn3phase.grid import helmholtz_tridiag, make_grid
        from gn3phase.solver import _inner_newton

        grid = make_grid(1.0, 65)
        tau, kappa, slope = 1e-3, 1.0, -0.3
        lower, diag, upper = helmholtz_tridiag(grid, 1.0, tau)
        rng = np.random.default_rng(5)
        rhs = 0.5 * np.cos(np.pi * grid.x) + 0.01 * rng.standard_normal(grid.n)
        z0 = np.zeros(grid.n)

        fused, iters = kernels.newton_tridiag_cubic(
            lower, diag, upper, rhs, z0, tau * kappa, tau * slope, 1e-12, 50)
        assert iters >= 0

        def nonlin(z):
            return tau * (kappa * z**3 + slope * z), tau * (3 * kappa * z**2 + slope)

        generic = _inner_newton(lower, diag, upper, rhs, z0, nonlin, "test", 0)
        # the generic path stops at its own 1e-10 residual, so the two
        # solutions can differ by up to that much
        assert np.max(np.abs(fused - generic)) < 2e-10

    def test_reports_failure_for_impossible_tolerance(self):
        from gn3phase.grid import helmholtz_tridiag, make_grid

        grid = make_grid(1.0, 17)
        lower, diag, upper = helmholtz_tridiag(grid, 1.0, 1e-3)
        rhs = np.ones(grid.n)
        _, iters = kernels.newton_tridiag_cubic(
            lower, diag, upper, rhs, np.zeros(grid.n), 1e-3, 0.0, 1e-30, 3)
        assert iters == -1


@pytest.mark.skipif(not NUMBA_ENABLED, reason="compiled backend not active")
class TestBackendEquivalence:
    def test_py_func_matches_compiled(self):
        rng = np.random.default_rng(123)
        lower, diag, upper, rhs = random_dd_system(rng, 41)
        compiled = kernels.thomas_solve(lower, diag, upper, rhs)
        fallback = kernels.thomas_solve.py_func(lower, diag, upper, rhs)
        assert np.array_equal(compiled, fallback)

        s = np.linspace(-2.0, 2.0, 101)
        assert np.array_equal(kernels.resolvent_cubic(s, 0.3),
                              kernels.resolvent_cubic.py_func(s, 0.3))
        assert np.array_equal(kernels.resolvent_log(s, 0.1),
                              kernels.resolvent_log.py_func(s, 0.1))

    def test_env_flag_selects_numpy_fallback(self):
        code = (
            "import json, numpy as np\n"
            "from gn3phase.backend import NUMBA_ENABLED\n"
            "from gn3phase import kernels\n"
            "s = np.linspace(-2.0, 2.0, 11)\n"
            "print(json.dumps({'numba': NUMBA_ENABLED,"
            " 'r': kernels.resolvent_cubic(s, 0.5).tolist()}))\n"
        )
        env = dict(os.environ, GN3_NUMBA="0")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        payload = json.loads(out.stdout.strip().splitlines()[-1])
        assert payload["numba"] is False
        s = np.linspace(-2.0, 2.0, 11)
        assert np.allclose(payload["r"], kernels.resolvent_cubic(s, 0.5),
                           rtol=0.0, atol=1e-14)
