"""Compiled inner loops: tridiagonal elimination and resolvent root-finding.

All functions are array-in/array-out with no Python objects inside, so the
identical source runs under numba (default) and as plain numpy/Python when
the fallback backend is active; ``f.py_func`` exposes the uncompiled path
when numba is on.
"""

from __future__ import annotations

import numpy as np

from .backend import njit

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200

# Resolvents of the singular graph are clamped strictly inside (-1, 1) so the
# logarithm is never evaluated at the boundary.
LOG_DOMAIN_MARGIN = 1e-14


@njit
def thomas_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system by forward elimination + back substitution.

    Row i reads ``lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]``;
    ``lower[0]`` and ``upper[-1]`` are ignored.  Callers build operators of
    the form a*I - b*Lap with a > 0, b >= 0, which are diagonally dominant,
    so no pivoting is done.
    """
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    x = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit
def resolvent_cubic(s, c):
    """Elementwise root of r + c*r**3 = s with c >= 0.

    Safeguarded Newton on a monotone function: the root is bracketed by 0
    and s, Newton steps leaving the bracket fall back to bisection.
    """
    out = np.empty_like(s)
    for k in range(s.shape[0]):
        sk = s[k]
        if c == 0.0 or sk == 0.0:
            out[k] = sk
            continue
        if sk > 0.0:
            lo, hi = 0.0, sk
        else:
            lo, hi = sk, 0.0
        r = sk / (1.0 + c * sk * sk)
        tol = ROOT_TOL * (1.0 + abs(sk))
        for _ in range(ROOT_MAX_ITER):
            f = r + c * r * r * r - sk
            if abs(f) <= tol:
                break
            if f > 0.0:
                hi = r
            else:
                lo = r
            step = f / (1.0 + 3.0 * c * r * r)
            rn = r - step
            if rn <= lo or rn >= hi:
                rn = 0.5 * (lo + hi)
            r = rn
        out[k] = r
    return out


@njit
def resolvent_log(s, e):
    """Elementwise root of r + e*log((1+r)/(1-r)) = s on (-1, 1), e > 0.

    The function is odd, increasing and convex on [0, 1), so the positive
    branch is solved with bracketed Newton and reflected.  Roots closer to
    the boundary than the floating-point margin are clamped.
    """
    out = np.empty_like(s)
    rmax = 1.0 - LOG_DOMAIN_MARGIN
    for k in range(s.shape[0]):
        sk = s[k]
        a = abs(sk)
        if a == 0.0:
            out[k] = 0.0
            continue
        sign = 1.0 if sk > 0.0 else -1.0
        fmax = rmax + e * np.log((1.0 + rmax) / (1.0 - rmax)) - a
        if fmax <= 0.0:
            out[k] = sign * rmax
            continue
        lo = 0.0
        hi = min(a, rmax)
        # f(min(a, rmax)) >= 0 because the log term is nonnegative there.
        r = hi / (1.0 + 2.0 * e / (1.0 - hi * hi + 1e-300))
        if r <= lo or r >= hi:
            r = 0.5 * (lo + hi)
        tol = ROOT_TOL * (1.0 + a)
        for _ in range(ROOT_MAX_ITER):
            f = r + e * np.log((1.0 + r) / (1.0 - r)) - a
            if abs(f) <= tol:
                break
            if f > 0.0:
                hi = r
            else:
                lo = r
            fp = 1.0 + 2.0 * e / (1.0 - r * r)
            rn = r - f / fp
            if rn <= lo or rn >= hi:
                rn = 0.5 * (lo + hi)
            r = rn
        out[k] = sign * r
    return out


@njit
def tridiag_apply(lower, diag, upper, z):
    """Matrix-vector product for the tridiagonal layout of thomas_solve."""
    n = diag.shape[0]
    out = np.empty(n)
    out[0] = diag[0] * z[0] + upper[0] * z[1]
    for i in range(1, n - 1):
        out[i] = lower[i] * z[i - 1] + diag[i] * z[i] + upper[i] * z[i + 1]
    out[n - 1] = lower[n - 1] * z[n - 2] + diag[n - 1] * z[n - 1]
    return out


@njit
def newton_tridiag_cubic(lower, diag, upper, rhs, z0, c3, c1, tol, max_iter):
    """Newton solve of A z + c1*z + c3*z**3 = rhs with tridiagonal A.

    This is the whole inner iteration of a phase step with the merged cubic
    nonlinearity; fusing it avoids per-iteration Python overhead on runs
    with hundreds of thousands of steps.  Returns (z, iterations), with
    iterations = -1 if the tolerance was not reached.
    """
    n = diag.shape[0]
    z = z0.copy()
    cp = np.empty(n)
    dp = np.empty(n)
    scale = 1.0
    for i in range(n):
        a = abs(rhs[i])
        if a > scale:
            scale = a
    for it in range(max_iter):
        # residual of the nonlinear system
        worst = 0.0
        f0 = diag[0] * z[0] + upper[0] * z[1] + c1 * z[0] + c3 * z[0] ** 3 - rhs[0]
        worst = abs(f0)
        for i in range(1, n - 1):
            fi = (
                lower[i] * z[i - 1]
                + diag[i] * z[i]
                + upper[i] * z[i + 1]
                + c1 * z[i]
                + c3 * z[i] ** 3
                - rhs[i]
            )
            if abs(fi) > worst:
                worst = abs(fi)
        fn = (
            lower[n - 1] * z[n - 2]
            + diag[n - 1] * z[n - 1]
            + c1 * z[n - 1]
            + c3 * z[n - 1] ** 3
            - rhs[n - 1]
        )
        if abs(fn) > worst:
            worst = abs(fn)
        if worst <= tol * scale:
            return z, it
        # one Thomas solve of (A + diag(c1 + 3 c3 z^2)) dz = -F, fused with
        # the residual recomputation
        d0 = diag[0] + c1 + 3.0 * c3 * z[0] * z[0]
        cp[0] = upper[0] / d0
        dp[0] = -(diag[0] * z[0] + upper[0] * z[1] + c1 * z[0] + c3 * z[0] ** 3 - rhs[0]) / d0
        for i in range(1, n):
            if i < n - 1:
                fi = (
                    lower[i] * z[i - 1]
                    + diag[i] * z[i]
                    + upper[i] * z[i + 1]
                    + c1 * z[i]
                    + c3 * z[i] ** 3
                    - rhs[i]
                )
            else:
                fi = (
                    lower[i] * z[i - 1]
                    + diag[i] * z[i]
                    + c1 * z[i]
                    + c3 * z[i] ** 3
                    - rhs[i]
                )
            di = diag[i] + c1 + 3.0 * c3 * z[i] * z[i]
            denom = di - lower[i] * cp[i - 1]
            cp[i] = upper[i] / denom
            dp[i] = (-fi - lower[i] * dp[i - 1]) / denom
        z[n - 1] += dp[n - 1]
        prev = dp[n - 1]
        for i in range(n - 2, -1, -1):
            prev = dp[i] - cp[i] * prev
            z[i] += prev
    return z, -1
