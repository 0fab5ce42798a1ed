"""Time integration of the coupled balance/phase system.

In terms of the time-integrated enthalpy y (so v = dy/dt is the enthalpy)
and the phase variable u, the system reads

    d2y/dt2 - alpha*Lap dy/dt - beta*Lap y
        = -alpha*Lap u - beta*Lap (1*u) + f,
    du/dt - Lap u + xi + g(u) = dy/dt,      xi in graph(u),

with homogeneous Neumann boundaries and initial data y(0) = w0,
dy/dt(0) = v0 + u0, u(0) = u0.  alpha = 0 is admitted and gives the
undamped (purely hyperbolic) balance equation.

The stepper is first-order IMEX implicit Euler.  Each step first solves the
phase equation implicitly in Lap u and in the (regularized or merged)
graph, explicitly in the coupling v^m, then updates the running time
integral of u, and finally advances v through a single Helmholtz solve that
treats both Laplacians implicitly; there is no CFL restriction coupling the
step size to alpha.  Multivalued graphs enter through their Yosida
approximation with parameter eps_yosida (default: the time step); for a
graph that is single-valued on the whole line the graph is merged with the
coupling g and no regularization is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import ConvergenceError, DomainViolationError
from .grid import SpaceGrid, helmholtz_tridiag, laplacian_neumann
from .monotone import (
    CouplingSpec,
    DoubleWell,
    GraphSpec,
    defined_on_real_line,
    domain_interval,
    gamma,
    gamma_prime,
    moreau,
    potential,
    yosida,
    yosida_with_derivative,
)

__all__ = [
    "ProblemData",
    "Trajectory",
    "State",
    "PhysicalFields",
    "simulate",
    "step",
    "parabolic_solve",
    "parabolic_bound_ratio",
    "reconstruct_physical",
    "free_energy",
]

INNER_TOL = 1e-10
INNER_MAX_ITER = 100
FIXED_POINT_RELAXATION = 0.5


SourceFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemData:
    """One instance of the damped (alpha > 0) or limit (alpha = 0) problem.

    ``f`` and ``u_source`` are callables of (x_array, t) sampled on demand;
    None means identically zero.  ``u_source`` is an extra source in the
    phase equation used by manufactured-solution verification.
    ``smooth_gamma`` selects the merged-graph mode; None resolves to True
    exactly when the graph is single-valued on all of R.
    """

    alpha: float
    beta: float
    w0: np.ndarray
    v0: np.ndarray
    u0: np.ndarray
    f: SourceFn | None
    graph: GraphSpec
    coupling: CouplingSpec
    u_source: SourceFn | None = None
    smooth_gamma: bool | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must satisfy 0 <= alpha <= 1, got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        for name in ("w0", "v0", "u0"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"initial field {name} contains non-finite entries")
        lo, hi, _, _ = domain_interval(self.graph)
        if np.any(self.u0 < lo) or np.any(self.u0 > hi):
            raise ValueError(
                f"u0 must take values in the closure [{lo}, {hi}] of the graph domain"
            )
        if not np.all(np.isfinite(potential(self.graph, self.u0))):
            raise ValueError("the potential of u0 must be finite at every node")
        if self.smooth_gamma and not defined_on_real_line(self.graph):
            raise ValueError(
                "merged smooth mode requires a graph that is single-valued on all of R"
            )

    @property
    def merged_smooth(self) -> bool:
        if self.smooth_gamma is None:
            return defined_on_real_line(self.graph)
        return self.smooth_gamma


class State(NamedTuple):
    m: int
    y: np.ndarray
    v: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    conv: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Discrete fields at the time nodes 0..n_steps, stored as (M+1, n) stacks.

    v is the backward-difference derivative of y (the scheme keeps
    y^m = y^{m-1} + tau*v^m exactly), conv is the running rectangle-rule
    integral of u with right-endpoint updates, xi the graph selection.
    eps_yosida records the regularization actually used (0 in merged mode).
    """

    grid: SpaceGrid
    tau: float
    n_steps: int
    eps_yosida: float
    y: np.ndarray
    v: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    conv: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)

    def state(self, m: int) -> State:
        return State(m, self.y[m], self.v[m], self.u[m], self.xi[m], self.conv[m])


def _sample(fn: SourceFn | None, x: np.ndarray, t: float) -> np.ndarray:
    if fn is None:
        return np.zeros_like(x)
    return np.asarray(fn(x, t), dtype=float)


def _inner_newton(lower, diag, upper, rhs, z0, nonlin, label, step_index):
    """Solve A z + N(z) = rhs, N elementwise monotone-ish with derivative.

    ``nonlin(z)`` returns (N(z), N'(z)).  The Jacobian A + diag(N') stays
    tridiagonal, so every iteration is one Thomas solve.
    """
    z = z0.copy()
    scale = max(1.0, float(np.max(np.abs(rhs))))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(INNER_MAX_ITER):
            val, der = nonlin(z)
            residual = kernels.tridiag_apply(lower, diag, upper, z) + val - rhs
            worst = float(np.max(np.abs(residual)))
            if not np.isfinite(worst):
                break
            if worst <= INNER_TOL * scale:
                return z
            delta = kernels.thomas_solve(lower, diag + der, upper, -residual)
            z += delta
    raise ConvergenceError(
        f"{label} Newton iteration did not reach {INNER_TOL:g} within "
        f"{INNER_MAX_ITER} iterations at step {step_index}"
    )


def _inner_fixed_point(lower, diag, upper, rhs, z0, nonlin, label, step_index, shift=0.0):
    """Damped fixed-point iteration for A z + N(z) = rhs.

    Without shift this is the relaxed map
    z <- (1-w) z + w A^{-1}(rhs - N(z)); with a positive shift the update
    solves (A + shift) z = rhs + shift*z - N(z) at full step, which is a
    contraction whenever shift dominates the variation of N.
    """
    z = z0.copy()
    scale = max(1.0, float(np.max(np.abs(rhs))))
    d = diag + shift
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(INNER_MAX_ITER):
            val, _ = nonlin(z)
            residual = kernels.tridiag_apply(lower, diag, upper, z) + val - rhs
            worst = float(np.max(np.abs(residual)))
            if not np.isfinite(worst):
                break
            if worst <= INNER_TOL * scale:
                return z
            if shift > 0.0:
                z = kernels.thomas_solve(lower, d, upper, rhs + shift * z - val)
            else:
                zn = kernels.thomas_solve(lower, diag, upper, rhs - val)
                z = (1.0 - FIXED_POINT_RELAXATION) * z + FIXED_POINT_RELAXATION * zn
    raise ConvergenceError(
        f"{label} fixed-point iteration did not reach {INNER_TOL:g} within "
        f"{INNER_MAX_ITER} iterations at step {step_index}; "
        "the product tau/eps_yosida is likely too large"
    )


class _Stepper:
    """Precomputed operators and samplers for one simulation."""

    def __init__(self, data: ProblemData, grid: SpaceGrid, tau: float,
                 eps_yosida: float | None, inner: str, check_residuals: bool):
        if tau <= 0.0:
            raise ValueError(f"time step must be positive, got tau={tau}")
        if inner not in ("newton", "fixed_point"):
            raise ValueError(f"inner solver must be 'newton' or 'fixed_point', got {inner!r}")
        for name in ("w0", "v0", "u0"):
            if getattr(data, name).shape != (grid.n,):
                raise ValueError(f"initial field {name} does not match the grid ({grid.n} nodes)")
        self.data = data
        self.grid = grid
        self.tau = tau
        self.inner = inner
        self.check_residuals = check_residuals
        self.merged = data.merged_smooth
        self.eps = 0.0 if self.merged else (tau if eps_yosida is None else float(eps_yosida))
        if not self.merged and self.eps <= 0.0:
            raise ValueError(f"eps_yosida must be positive, got {self.eps}")
        self.u_bands = helmholtz_tridiag(grid, 1.0, tau)
        # beta > 0 keeps this positive even in the undamped alpha = 0 case
        self.v_bands = helmholtz_tridiag(grid, 1.0, tau * (data.alpha + data.beta * tau))
        if self.merged and inner == "newton" and data.coupling.dg is None:
            raise ValueError(
                "merged smooth mode with Newton needs coupling.dg; "
                "use inner='fixed_point' or provide the derivative"
            )
        # merged cubic nonlinearity with linear g goes through the fused kernel
        self.cubic_fast = (
            self.merged
            and inner == "newton"
            and isinstance(data.graph, DoubleWell)
            and data.coupling.linear_slope is not None
        )

    def _nonlin_yosida(self, z):
        val, der = yosida_with_derivative(self.data.graph, self.eps, z)
        return self.tau * val, self.tau * der

    def _nonlin_merged(self, z):
        cp = self.data.coupling
        val = gamma(self.data.graph, z) + cp.g(z)
        if cp.dg is None:
            return self.tau * val, None
        return self.tau * val, self.tau * (gamma_prime(self.data.graph, z) + cp.dg(z))

    def _merged_shift(self, u):
        # local Lipschitz bound of graph + g on the range of the previous step
        bound = float(np.max(np.abs(u))) + 1.0
        lam = float(gamma_prime(self.data.graph, bound)) + self.data.coupling.lip_g
        return self.tau * lam

    def advance(self, state: State) -> State:
        data, grid, tau = self.data, self.grid, self.tau
        m, y, v, u, _, conv = state
        t_next = tau * (m + 1)
        src = _sample(data.u_source, grid.x, t_next)

        lower, diag, upper = self.u_bands
        if self.merged:
            rhs_u = u + tau * (v + src)
            if self.cubic_fast:
                u_next, iters = kernels.newton_tridiag_cubic(
                    lower, diag, upper, rhs_u, u,
                    tau * self.data.graph.kappa, tau * data.coupling.linear_slope,
                    INNER_TOL, INNER_MAX_ITER,
                )
                if iters < 0:
                    raise ConvergenceError(
                        f"phase Newton iteration did not reach {INNER_TOL:g} within "
                        f"{INNER_MAX_ITER} iterations at step {m}"
                    )
            elif self.inner == "newton":
                u_next = _inner_newton(lower, diag, upper, rhs_u, u,
                                       self._nonlin_merged, "phase", m)
            else:
                u_next = _inner_fixed_point(lower, diag, upper, rhs_u, u,
                                            self._nonlin_merged, "phase", m,
                                            shift=self._merged_shift(u))
            xi_next = np.zeros_like(u_next)
        else:
            rhs_u = u + tau * (v - data.coupling.g(u) + src)
            if self.inner == "newton":
                u_next = _inner_newton(lower, diag, upper, rhs_u, u,
                                       self._nonlin_yosida, "phase", m)
            else:
                u_next = _inner_fixed_point(lower, diag, upper, rhs_u, u,
                                            self._nonlin_yosida, "phase", m)
            xi_next = yosida(data.graph, self.eps, u_next)

        conv_next = conv + tau * u_next

        f_next = _sample(data.f, grid.x, t_next)
        # beta*Lap y - alpha*Lap u' - beta*Lap conv' in one stencil application
        rhs_v = v + tau * (
            laplacian_neumann(
                grid, data.beta * (y - conv_next) - data.alpha * u_next
            )
            + f_next
        )
        lv, dv, uv = self.v_bands
        v_next = kernels.thomas_solve(lv, dv, uv, rhs_v)
        if self.check_residuals:
            res = kernels.tridiag_apply(lv, dv, uv, v_next) - rhs_v
            scale = max(1.0, float(np.max(np.abs(rhs_v))))
            if float(np.max(np.abs(res))) > 1e-10 * scale:
                raise ConvergenceError(
                    f"balance solve residual {np.max(np.abs(res)):.3e} "
                    f"exceeds tolerance at step {m}"
                )
        y_next = y + tau * v_next
        return State(m + 1, y_next, v_next, u_next, xi_next, conv_next)


def initial_state(data: ProblemData, grid: SpaceGrid, tau: float,
                  eps_yosida: float | None = None) -> State:
    """Discrete initial data: y = w0, v = v0 + u0, u = u0, zero integral."""
    u0 = np.asarray(data.u0, dtype=float).copy()
    if data.merged_smooth:
        xi0 = np.zeros_like(u0)
    else:
        eps = tau if eps_yosida is None else float(eps_yosida)
        xi0 = yosida(data.graph, eps, u0)
    return State(
        0,
        np.asarray(data.w0, dtype=float).copy(),
        np.asarray(data.v0, dtype=float) + u0,
        u0,
        xi0,
        np.zeros(grid.n),
    )


def step(state: State, data: ProblemData, grid: SpaceGrid, tau: float, *,
         eps_yosida: float | None = None, inner: str = "newton",
         check_residuals: bool = False) -> State:
    """Advance one IMEX step; see the module docstring for the scheme."""
    stepper = _Stepper(data, grid, tau, eps_yosida, inner, check_residuals)
    return stepper.advance(state)


def simulate(data: ProblemData, grid: SpaceGrid, tau: float, n_steps: int, *,
             eps_yosida: float | None = None, inner: str = "newton",
             check_residuals: bool = False, observer=None,
             store: bool = True) -> Trajectory | State:
    """Integrate n_steps steps from the discrete initial data.

    Returns the full Trajectory; with store=False only the final State is
    returned (used by long manufactured-solution runs).  ``observer(m, t,
    y, v, u)`` is invoked at every time node including the initial one.
    """
    if n_steps < 0:
        raise ValueError(f"number of steps must be nonnegative, got {n_steps}")
    stepper = _Stepper(data, grid, tau, eps_yosida, inner, check_residuals)
    state = initial_state(data, grid, tau, eps_yosida)
    if store:
        shape = (n_steps + 1, grid.n)
        ys, vs, us, xis, convs = (np.empty(shape) for _ in range(5))
        for arr, val in zip((ys, vs, us, xis, convs), state[1:]):
            arr[0] = val
    if observer is not None:
        observer(0, 0.0, state.y, state.v, state.u)
    for m in range(1, n_steps + 1):
        state = stepper.advance(state)
        if store:
            for arr, val in zip((ys, vs, us, xis, convs), state[1:]):
                arr[m] = val
        if observer is not None:
            observer(m, tau * m, state.y, state.v, state.u)
    if not store:
        return state
    return Trajectory(grid=grid, tau=tau, n_steps=n_steps, eps_yosida=stepper.eps,
                      y=ys, v=vs, u=us, xi=xis, conv=convs)


def parabolic_solve(grid: SpaceGrid, z0: np.ndarray, h, tau: float,
                    n_steps: int) -> np.ndarray:
    """Implicit Euler for dz/dt - Lap z = h with Neumann boundaries.

    ``h`` is a sequence of n_steps fields, h[m-1] acting on step m (right
    endpoint sampling).  Returns the (M+1, n) stack of time levels.
    """
    if tau <= 0.0:
        raise ValueError(f"time step must be positive, got tau={tau}")
    if len(h) != n_steps:
        raise ValueError(f"need exactly {n_steps} source fields, got {len(h)}")
    lower, diag, upper = helmholtz_tridiag(grid, 1.0, tau)
    zs = np.empty((n_steps + 1, grid.n))
    zs[0] = np.asarray(z0, dtype=float)
    for m in range(1, n_steps + 1):
        rhs = zs[m - 1] + tau * np.asarray(h[m - 1], dtype=float)
        zs[m] = kernels.thomas_solve(lower, diag, upper, rhs)
    return zs


def parabolic_bound_ratio(grid: SpaceGrid, zs: np.ndarray, h, tau: float) -> float:
    """Stability quotient of the discrete parabolic energy estimate.

    Ratio of max_m ||z^m||_V + sqrt(tau*sum ||dz/dt||_H^2) to
    ||z^0||_V + sqrt(tau*sum ||h^m||_H^2); finite uniformly in the data.
    """
    from .norms import bochner, norm_h, norm_v  # local import to avoid a cycle

    lhs = float(np.max(norm_v(grid, zs))) + bochner(grid, zs, tau, "H", "H1T")
    hs = np.asarray(h, dtype=float)
    rhs = float(norm_v(grid, zs[0])) + float(
        np.sqrt(tau * np.sum(np.atleast_1d(norm_h(grid, hs)) ** 2))
    )
    if rhs == 0.0:
        raise ValueError("trivial data: the stability quotient is undefined")
    return lhs / rhs


@dataclass(frozen=True, eq=False)
class PhysicalFields:
    """Original variables: thermal displacement w, temperature theta, enthalpy e."""

    w: np.ndarray
    theta: np.ndarray
    e: np.ndarray


def reconstruct_physical(traj: Trajectory) -> PhysicalFields:
    """Recover w = y - (1*u), theta = v - u and the enthalpy e.

    e is assembled as theta + u so that the enthalpy identity holds at the
    bit level; analytically e is exactly v, and numerically the two agree to
    one rounding unit per node.
    """
    theta = traj.v - traj.u
    return PhysicalFields(w=traj.y - traj.conv, theta=theta, e=theta + traj.u)


def free_energy(grid: SpaceGrid, theta: np.ndarray, u: np.ndarray,
                graph: GraphSpec, coupling: CouplingSpec,
                eps_potential: float = 0.0) -> float:
    """Total free energy of one (theta, u) slice.

    Integrates -theta^2/2 - theta*u + phi(u) + G(u) + |grad u|^2/2 with
    trapezoid quadrature (midpoint rule for the gradient term).  A positive
    ``eps_potential`` replaces phi by its Moreau envelope, which is what the
    energy monitor of a regularized run reports.
    """
    if eps_potential > 0.0:
        phi = moreau(graph, eps_potential, u)
    else:
        phi = potential(graph, u)
    if not np.all(np.isfinite(phi)):
        raise DomainViolationError("phase variable violates the obstacle: potential is infinite")
    nodal = -0.5 * theta**2 - theta * u + phi + coupling.G(u)
    g = np.diff(u) / grid.dx
    return float(grid.integrate(nodal) + 0.5 * grid.dx * np.sum(g * g))
