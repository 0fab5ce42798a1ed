"""1-D spatial discretization with homogeneous Neumann boundaries.

Fields are plain float ndarrays of length ``grid.n`` holding nodal samples
on the uniform grid over (0, L).  The Laplacian uses the standard second
order stencil with ghost-point reflection at both ends; integrals use the
trapezoid rule.  This pairing is summation-by-parts exact: the weighted
inner product of ``lap(u)`` with ``v`` is symmetric, negative semidefinite,
and annihilates constants, which is what the conservation and energy checks
of the time stepper rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IncompatibleSystemError

__all__ = [
    "SpaceGrid",
    "make_grid",
    "laplacian_neumann",
    "helmholtz_tridiag",
    "solve_helmholtz",
    "cumulative_time_integral",
]


@dataclass(frozen=True, eq=False)
class SpaceGrid:
    """Uniform grid on (0, length) with n nodes and trapezoid weights."""

    length: float
    n: int
    dx: float = field(init=False)
    x: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got n={self.n}")
        if not self.length > 0.0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        dx = self.length / (self.n - 1)
        x = np.linspace(0.0, self.length, self.n)
        w = np.full(self.n, dx)
        w[0] = w[-1] = dx / 2.0
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)
        self.x.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, u):
        """Trapezoid quadrature along the last axis."""
        return np.sum(self.weights * u, axis=-1)

    def mean(self, u):
        return self.integrate(u) / self.length


def make_grid(length: float, n: int) -> SpaceGrid:
    return SpaceGrid(length=float(length), n=int(n))


def laplacian_neumann(grid: SpaceGrid, u: np.ndarray) -> np.ndarray:
    """Second-order Laplacian with ghost-point Neumann closure.

    Works on any (..., n) stack of fields.  The boundary rows use the
    reflected stencil 2*(u[1]-u[0])/dx^2, so constants map to exactly zero
    and the weighted row sums vanish.
    """
    h2 = grid.dx * grid.dx
    out = np.empty_like(u)
    out[..., 1:-1] = (u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:]) / h2
    out[..., 0] = 2.0 * (u[..., 1] - u[..., 0]) / h2
    out[..., -1] = 2.0 * (u[..., -2] - u[..., -1]) / h2
    return out


def helmholtz_tridiag(grid: SpaceGrid, a: float, b: float):
    """Tridiagonal bands of a*I - b*Lap in the layout of kernels.thomas_solve."""
    r = b / (grid.dx * grid.dx)
    n = grid.n
    lower = np.full(n, -r)
    upper = np.full(n, -r)
    diag = np.full(n, a + 2.0 * r)
    upper[0] = -2.0 * r
    lower[-1] = -2.0 * r
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper


def _solve_singular_neumann(grid: SpaceGrid, b: float, rhs: np.ndarray) -> np.ndarray:
    """Solve -b*Lap z = rhs for mean-free rhs, normalized to zero mean.

    Forward elimination of the tridiagonal system is, for this operator,
    exactly a cumulative flux integration: the boundary row fixes the first
    midpoint gradient, each interior row advances it, and the solution is
    recovered by a second cumulative sum.  The last row holds automatically
    because the right-hand side has zero weighted mean.
    """
    mean = grid.mean(rhs)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if abs(mean) > 1e-10 * scale:
        raise IncompatibleSystemError(
            f"pure-Neumann solve needs a mean-free right-hand side, got weighted mean {mean:.3e}"
        )
    r = rhs - mean
    dx = grid.dx
    # midpoint gradients g[i] = (z[i+1]-z[i])/dx, i = 0..n-2
    g = np.empty(grid.n - 1)
    g[0] = -r[0] * dx / (2.0 * b)
    g[1:] = -r[1:-1] * dx / b
    np.cumsum(g, out=g)
    z = np.empty(grid.n)
    z[0] = 0.0
    np.cumsum(g * dx, out=z[1:])
    z -= grid.mean(z)
    return z


def solve_helmholtz(grid: SpaceGrid, a: float, b: float, rhs: np.ndarray) -> np.ndarray:
    """Solve a*z - b*Lap z = rhs with the Neumann closure.

    a > 0 gives a strictly diagonally dominant tridiagonal system solved by
    direct elimination; a = 0 requires a mean-free right-hand side and
    returns the zero-mean solution.
    """
    if a < 0.0 or b <= 0.0:
        raise ValueError(f"need a >= 0 and b > 0, got a={a}, b={b}")
    if a == 0.0:
        return _solve_singular_neumann(grid, b, rhs)
    lower, diag, upper = helmholtz_tridiag(grid, a, b)
    return kernels.thomas_solve(lower, diag, upper, np.ascontiguousarray(rhs, dtype=float))


def cumulative_time_integral(grid: SpaceGrid, history, tau: float) -> np.ndarray:
    """Left-rectangle time integral tau * sum(history) as a single field.

    After m completed steps with history = [u^0, ..., u^{m-1}] this is the
    discrete (1*u)(t_m); an empty history gives the zero field.
    """
    if tau <= 0.0:
        raise ValueError(f"time step must be positive, got tau={tau}")
    out = np.zeros(grid.n)
    for u in history:
        out += u
    out *= tau
    return out
