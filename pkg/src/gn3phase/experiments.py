"""Reference scenarios, the damping-coefficient sweep, and verification runs.

A sweep integrates the limit problem (alpha = 0) once and the damped
problem once per alpha on the identical grid, time step and regularization,
so the discretization error cancels to first order in the difference and
what remains is the genuine alpha-sensitivity.  Errors are measured in the
norm combinations that the continuous theory bounds:

* sqrt_group      -- y in W1inf(H) + Linf(V), u in Linf(H) + L2(V); expected
                     order 1/2 under square-root data schedules
* linear_group    -- y in W1inf(H) + Linf(V), u in H1(H) + Linf(V) + L2(W);
                     expected order 1 for merged smooth graphs
* strong_sqrt_group -- y in W1inf(V) + Linf(W); expected order at least 1/2

Scenarios S1 (smooth double well), S2 (double obstacle) and S3
(logarithmic) share the data w0 = cos(pi x), v0 = 0, u0 = cos(pi x)/2 and
f = 0 on the unit interval, so each hypothesis block of the rate theory has
one checkable instance.  An optional data schedule perturbs the damped
problem's data by alpha^r * cos(pi x)-shaped bumps to realize the declared
convergence rate r of the data.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DegenerateDataError
from .grid import SpaceGrid, make_grid
from .monotone import (
    CouplingSpec,
    DoubleObstacle,
    DoubleWell,
    GraphSpec,
    Logarithmic,
    default_coupling,
    moreau,
    potential,
)
from .norms import RateFit, bochner, fit_rate, norm_h, norm_v
from .solver import ProblemData, Trajectory, free_energy, reconstruct_physical, simulate

__all__ = [
    "Scenario",
    "SCENARIOS",
    "get_scenario",
    "ErrorReport",
    "RateReport",
    "MmsReport",
    "ERROR_KINDS_Y",
    "ERROR_KINDS_U_BASE",
    "ERROR_KINDS_U_SMOOTH",
    "GROUPS",
    "DEFAULT_ALPHAS",
    "sweep",
    "compare_trajectories",
    "rate_study",
    "mms_verify",
    "energy_monitor",
    "terminal_diagnostics",
    "diagnostic_ratios",
    "UNIFORM_DIAGNOSTICS",
]

DEFAULT_ALPHAS = tuple(2.0**-k for k in range(4, 11))

# (time aggregation, spatial norm) pairs measured per trajectory component
ERROR_KINDS_Y = (("W1infT", "H"), ("LinfT", "V"), ("W1infT", "V"), ("LinfT", "W"))
ERROR_KINDS_U_BASE = (("LinfT", "H"), ("L2T", "V"))
ERROR_KINDS_U_SMOOTH = (("H1T", "H"), ("LinfT", "V"), ("L2T", "W"))

GROUPS = {
    "sqrt_group": ("y:W1infT:H", "y:LinfT:V", "u:LinfT:H", "u:L2T:V"),
    "linear_group": ("y:W1infT:H", "y:LinfT:V", "u:H1T:H", "u:LinfT:V", "u:L2T:W"),
    "strong_sqrt_group": ("y:W1infT:V", "y:LinfT:W"),
}


def _cos_profile(x: np.ndarray, length: float = 1.0) -> np.ndarray:
    return np.cos(np.pi * x / length)


@dataclass(frozen=True)
class Scenario:
    """A named problem template with the damping coefficient left free.

    ``schedule_rate`` of None or 0 means alpha-independent data; 0.5 or 1
    perturbs the damped problem's data at that power of alpha (the limit
    problem always uses the unperturbed data).
    """

    name: str
    graph: GraphSpec
    coupling: CouplingSpec
    beta: float = 1.0
    length: float = 1.0
    t_final: float = 1.0
    grid_n: int = 257
    tau: float = 1e-3
    schedule_rate: float | None = None
    smooth_gamma: bool | None = None
    data_kind: str = "cosine"

    def __post_init__(self):
        if self.schedule_rate not in (None, 0.0, 0.5, 1.0):
            raise ValueError(
                f"data schedule rate must be one of 0, 0.5, 1, got {self.schedule_rate}"
            )
        if self.data_kind not in ("cosine", "stationary"):
            raise ValueError(f"unknown data kind {self.data_kind!r}")

    @property
    def n_steps(self) -> int:
        m = self.t_final / self.tau
        return int(round(m))

    def make_grid(self) -> SpaceGrid:
        return make_grid(self.length, self.grid_n)

    def base_fields(self, grid: SpaceGrid):
        if self.data_kind == "stationary":
            return np.ones(grid.n), np.zeros(grid.n), np.zeros(grid.n)
        c = _cos_profile(grid.x, self.length)
        return c.copy(), np.zeros(grid.n), 0.5 * c

    def _bump(self, alpha: float) -> float:
        if self.schedule_rate in (None, 0.0) or alpha == 0.0:
            return 0.0
        return alpha**self.schedule_rate

    def problem_data(self, alpha: float, grid: SpaceGrid) -> ProblemData:
        """Problem instance at the given alpha, data schedule applied."""
        w0, v0, u0 = self.base_fields(grid)
        s = self._bump(alpha)
        f: Callable | None = None
        if s != 0.0:
            length = self.length

            def f(x, t, _s=s, _length=length):  # time-independent bump
                return _s * _cos_profile(x, _length)

            c = _cos_profile(grid.x, self.length)
            w0 = w0 + s * c / 10.0
            v0 = v0 + s * c / 10.0
            u0 = u0 + s * c / 10.0
        return ProblemData(
            alpha=alpha, beta=self.beta, w0=w0, v0=v0, u0=u0, f=f,
            graph=self.graph, coupling=self.coupling, smooth_gamma=self.smooth_gamma,
        )

    def hat_data_norm(self, alpha: float, grid: SpaceGrid) -> float:
        """Measured size of the data perturbation at this alpha.

        Sum of the V norms of the initial-field bumps and the largest H norm
        of the source bump over the time nodes (the source bump here is time
        independent, so one sample suffices; kept general for clarity).
        """
        base = self.problem_data(0.0, grid)
        pert = self.problem_data(alpha, grid)
        total = (
            float(norm_v(grid, pert.w0 - base.w0))
            + float(norm_h(grid, pert.v0 - base.v0))
            + float(norm_v(grid, pert.u0 - base.u0))
        )
        f0 = np.zeros(grid.n) if base.f is None else base.f(grid.x, 0.0)
        f1 = np.zeros(grid.n) if pert.f is None else pert.f(grid.x, 0.0)
        return total + float(norm_h(grid, f1 - f0))


def _make_s1() -> Scenario:
    graph = DoubleWell(kappa=1.0)
    return Scenario(name="s1_smooth", graph=graph, coupling=default_coupling(graph))


def _make_s2() -> Scenario:
    graph = DoubleObstacle(-1.0, 1.0)
    return Scenario(name="s2_obstacle", graph=graph, coupling=default_coupling(graph))


def _make_s3() -> Scenario:
    graph = Logarithmic(kappa0=2.0, kappa1=1.0)
    return Scenario(name="s3_logarithmic", graph=graph, coupling=default_coupling(graph))


def _make_stationary() -> Scenario:
    graph = DoubleWell(kappa=1.0)
    return Scenario(name="stationary", graph=graph, coupling=default_coupling(graph),
                    data_kind="stationary")


SCENARIOS = {
    "s1_smooth": _make_s1,
    "s2_obstacle": _make_s2,
    "s3_logarithmic": _make_s3,
    "stationary": _make_stationary,
}


def get_scenario(name: str, **overrides) -> Scenario:
    try:
        scenario = SCENARIOS[name]()
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}"
        ) from None
    return replace(scenario, **overrides) if overrides else scenario


@dataclass(frozen=True)
class ErrorReport:
    """Differences between a damped run and the limit run, per norm kind."""

    alpha: float
    errors: dict[str, float]
    groups: dict[str, float]
    hat_data: float


def _error_kinds(smooth: bool):
    kinds = [("y", t, s) for t, s in ERROR_KINDS_Y]
    kinds += [("u", t, s) for t, s in ERROR_KINDS_U_BASE]
    if smooth:
        kinds += [("u", t, s) for t, s in ERROR_KINDS_U_SMOOTH]
    return kinds


def compare_trajectories(ref: Trajectory, run: Trajectory, smooth: bool,
                         alpha: float, hat_data: float = 0.0) -> ErrorReport:
    """Per-norm differences of two trajectories on the same discretization."""
    if ref.y.shape != run.y.shape or ref.tau != run.tau:
        raise ValueError("trajectories to compare must share grid, step and horizon")
    grid, tau = ref.grid, ref.tau
    diff = {"y": run.y - ref.y, "u": run.u - ref.u}
    errors: dict[str, float] = {}
    for comp, time, space in _error_kinds(smooth):
        errors[f"{comp}:{time}:{space}"] = bochner(grid, diff[comp], tau, space, time)
    groups = {}
    for gname, members in GROUPS.items():
        if all(k in errors for k in members):
            groups[gname] = sum(errors[k] for k in members)
    return ErrorReport(alpha=alpha, errors=errors, groups=groups, hat_data=hat_data)


def _validate_alphas(alphas) -> tuple[float, ...]:
    alphas = tuple(float(a) for a in alphas)
    if len(alphas) < 3:
        raise ValueError(f"need >= 3 sweep points, got {len(alphas)}")
    if any(not 0.0 < a <= 1.0 for a in alphas):
        raise ValueError("sweep values must lie in (0, 1]; the limit run is the reference")
    if any(a1 <= a2 for a1, a2 in zip(alphas, alphas[1:])):
        raise ValueError("sweep values must be strictly descending")
    return alphas


def sweep(scenario: Scenario, alphas=DEFAULT_ALPHAS, *, workers: int = 1,
          keep_trajectories: bool = False):
    """Run the limit problem and one damped problem per alpha; report errors.

    Returns a list of (alpha, ErrorReport) in the given (descending) order;
    with keep_trajectories=True returns (reports, reference, {alpha: run}).
    """
    alphas = _validate_alphas(alphas)
    grid = scenario.make_grid()
    tau, m = scenario.tau, scenario.n_steps
    ref_data = scenario.problem_data(0.0, grid)
    smooth = ref_data.merged_smooth

    ref = simulate(ref_data, grid, tau, m)

    def one(alpha: float) -> Trajectory:
        return simulate(scenario.problem_data(alpha, grid), grid, tau, m)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = dict(zip(alphas, pool.map(one, alphas)))
    else:
        runs = {a: one(a) for a in alphas}

    reports = [
        (a, compare_trajectories(ref, runs[a], smooth, a,
                                 hat_data=scenario.hat_data_norm(a, grid)))
        for a in alphas
    ]
    if keep_trajectories:
        return reports, ref, runs
    return reports


@dataclass(frozen=True)
class RateReport:
    """Fitted log-log slopes of the sweep errors, per norm kind and group."""

    scenario: str
    annotation: str
    points: dict[str, tuple[tuple[float, float], ...]]
    fits: dict[str, RateFit]


def _annotation(scenario: Scenario, smooth: bool) -> str:
    """Which error-estimate hypothesis block the scenario satisfies.

    A merged smooth graph with data converging at order 1 (or alpha
    independent) qualifies for the linear estimate; every declared schedule
    qualifies for the square-root estimate, since data converging at order
    1 or exactly matching both satisfy the weaker order-1/2 condition.
    """
    rate = scenario.schedule_rate
    if smooth and rate in (None, 0.0, 1.0):
        return "linear_rate_hypotheses"
    return "sqrt_rate_hypotheses"


def rate_study(scenario: Scenario, alphas=DEFAULT_ALPHAS, *, workers: int = 1,
               reports=None) -> RateReport:
    """Fit a slope per norm kind and group over the sweep errors.

    ``reports`` may pass the result of a previous sweep() to avoid rerunning.
    """
    if reports is None:
        reports = sweep(scenario, alphas, workers=workers)
    smooth = scenario.problem_data(0.0, scenario.make_grid()).merged_smooth
    points: dict[str, tuple[tuple[float, float], ...]] = {}
    fits: dict[str, RateFit] = {}
    kinds = [f"{c}:{t}:{s}" for c, t, s in _error_kinds(smooth)] + [
        g for g in GROUPS if all(
            k in reports[0][1].errors for k in GROUPS[g])
    ]
    for kind in kinds:
        pts = tuple(
            (a, rep.groups[kind] if kind in rep.groups else rep.errors[kind])
            for a, rep in reports
        )
        points[kind] = pts
        fits[kind] = fit_rate(pts)
    return RateReport(
        scenario=scenario.name,
        annotation=_annotation(scenario, smooth),
        points=points,
        fits=fits,
    )


# ---------------------------------------------------------------------------
# manufactured-solution verification

MMS_ALPHA = 0.5
MMS_TAUS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
MMS_GRID_NS = (33, 65, 129, 257)
# The time study gives err ~ 0.23*tau; at this step the first-order time
# error sits a factor ~5 below the second-order space error of the finest
# grid, so the space slopes stay clean.
MMS_TAU_FINE = 5e-6
MMS_TAU_SLOPE_RANGE = (0.8, 1.3)
MMS_DX_SLOPE_RANGE = (1.7, 2.3)


def _mms_exact_y(x, t):
    return (1.0 + t * t) * np.cos(np.pi * x)


def _mms_exact_u(x, t):
    return 0.5 * np.exp(-t) * np.cos(np.pi * x)


def _mms_sources(alpha: float, beta: float, kappa: float):
    """Sources that make the cosine pair an exact solution of the system.

    Derived by substituting y = (1+t^2) cos(pi x), u = exp(-t) cos(pi x)/2
    into the strong equations with the merged double-well nonlinearity
    kappa*u^3 + (1-kappa)*u.
    """
    p = np.pi * np.pi

    def f(x, t):
        factor = (
            2.0
            + 2.0 * alpha * p * t
            + beta * p * (1.0 + t * t)
            - 0.5 * alpha * p * np.exp(-t)
            - 0.5 * beta * p * (1.0 - np.exp(-t))
        )
        return factor * np.cos(np.pi * x)

    def u_src(x, t):
        u = _mms_exact_u(x, t)
        return (p - kappa) * u + kappa * u**3 - 2.0 * t * np.cos(np.pi * x)

    return f, u_src


@dataclass(frozen=True)
class MmsReport:
    tau_rows: tuple[tuple[float, float, float], ...]  # (tau, err_y, err_u)
    dx_rows: tuple[tuple[int, float, float, float], ...]  # (n, dx, err_y, err_u)
    tau_slope_y: float
    tau_slope_u: float
    dx_slope_y: float
    dx_slope_u: float

    @property
    def passed(self) -> bool:
        lo_t, hi_t = MMS_TAU_SLOPE_RANGE
        lo_x, hi_x = MMS_DX_SLOPE_RANGE
        return (
            lo_t <= self.tau_slope_y <= hi_t
            and lo_t <= self.tau_slope_u <= hi_t
            and lo_x <= self.dx_slope_y <= hi_x
            and lo_x <= self.dx_slope_u <= hi_x
        )


def _mms_single(n: int, tau: float, t_final: float, alpha: float, beta: float,
                kappa: float):
    """Worst-over-time H-norm errors of (y, u) against the exact pair.

    The sources and exact fields are all multiples of the fixed cosine
    profile (and its cube), precomputed once; runs with O(10^5) steps spend
    their time in the solver rather than in source evaluation.
    """
    grid = make_grid(1.0, n)
    graph = DoubleWell(kappa=kappa)
    c = np.cos(np.pi * grid.x)
    c3 = c**3
    p = np.pi * np.pi
    w = grid.weights

    def f(x, t):  # x ignored: profile precomputed on the run grid
        factor = (
            2.0 + 2.0 * alpha * p * t + beta * p * (1.0 + t * t)
            - 0.5 * alpha * p * np.exp(-t) - 0.5 * beta * p * (1.0 - np.exp(-t))
        )
        return factor * c

    def u_src(x, t):
        et = np.exp(-t)
        return (0.5 * (p - kappa) * et - 2.0 * t) * c + 0.125 * kappa * et**3 * c3

    data = ProblemData(
        alpha=alpha, beta=beta,
        w0=c.copy(), v0=-0.5 * c, u0=0.5 * c,
        f=f, graph=graph, coupling=default_coupling(graph), u_source=u_src,
    )
    worst = {"y": 0.0, "u": 0.0}

    def observer(m, t, y, v, u):
        dy = y - (1.0 + t * t) * c
        du = u - 0.5 * np.exp(-t) * c
        worst["y"] = max(worst["y"], np.sum(w * dy * dy))
        worst["u"] = max(worst["u"], np.sum(w * du * du))

    n_steps = int(round(t_final / tau))
    simulate(data, grid, tau, n_steps, observer=observer, store=False)
    return float(np.sqrt(worst["y"])), float(np.sqrt(worst["u"]))


def mms_verify(grid_ns=MMS_GRID_NS, taus=MMS_TAUS, *, t_final: float = 1.0,
               alpha: float = MMS_ALPHA, beta: float = 1.0, kappa: float = 1.0,
               tau_fine: float = MMS_TAU_FINE) -> MmsReport:
    """Refinement study of the full scheme against the manufactured pair.

    The time study runs on the finest grid; the space study runs at the
    fixed fine step ``tau_fine``, chosen small enough that the first-order
    time error stays below the second-order space error on the finest grid.
    """
    n_fine = max(grid_ns)
    tau_rows = []
    for tau in taus:
        ey, eu = _mms_single(n_fine, tau, t_final, alpha, beta, kappa)
        tau_rows.append((tau, ey, eu))
    dx_rows = []
    for n in grid_ns:
        ey, eu = _mms_single(n, tau_fine, t_final, alpha, beta, kappa)
        dx_rows.append((int(n), 1.0 / (n - 1), ey, eu))
    tau_fit_y = fit_rate([(t, e) for t, e, _ in tau_rows])
    tau_fit_u = fit_rate([(t, e) for t, _, e in tau_rows])
    dx_fit_y = fit_rate([(dx, e) for _, dx, e, _ in dx_rows])
    dx_fit_u = fit_rate([(dx, e) for _, dx, _, e in dx_rows])
    return MmsReport(
        tau_rows=tuple(tau_rows),
        dx_rows=tuple(dx_rows),
        tau_slope_y=tau_fit_y.slope,
        tau_slope_u=tau_fit_u.slope,
        dx_slope_y=dx_fit_y.slope,
        dx_slope_u=dx_fit_u.slope,
    )


# ---------------------------------------------------------------------------
# energy and regularity monitors

ENERGY_SERIES = (
    "v_h", "y_v", "alpha_grad_v2_cum", "u_h", "u_v2_cum",
    "phi_int", "xi2_cum", "free_energy",
)


def energy_monitor(traj: Trajectory, data: ProblemData) -> dict[str, np.ndarray]:
    """Per-step diagnostic series mirroring the uniform a priori estimates.

    Emits, at every time node: the H norm of the enthalpy v, the V norm of
    y, the running alpha-weighted dissipation alpha*tau*sum ||grad v||^2,
    the H norm of u, the running tau*sum ||u||_V^2, the integrated
    (regularized) potential of u, the running tau*sum ||xi||_H^2, and the
    free energy of the reconstructed (theta, u) pair.
    """
    grid, tau = traj.grid, traj.tau
    phys = reconstruct_physical(traj)
    v_h = np.atleast_1d(norm_h(grid, traj.v))
    y_v = np.atleast_1d(norm_v(grid, traj.y))
    grad_v2 = np.array([
        grid.dx * np.sum((np.diff(row) / grid.dx) ** 2) for row in traj.v
    ])
    cum_grad = np.zeros(len(grad_v2))
    cum_grad[1:] = data.alpha * tau * np.cumsum(grad_v2[1:])
    u_h = np.atleast_1d(norm_h(grid, traj.u))
    u_v2 = np.atleast_1d(norm_v(grid, traj.u)) ** 2
    cum_u = np.zeros(len(u_v2))
    cum_u[1:] = tau * np.cumsum(u_v2[1:])
    if traj.eps_yosida > 0.0:
        phi_vals = np.array([
            grid.integrate(moreau(data.graph, traj.eps_yosida, row)) for row in traj.u
        ])
    else:
        phi_vals = np.array([grid.integrate(potential(data.graph, row)) for row in traj.u])
    xi2 = np.atleast_1d(norm_h(grid, traj.xi)) ** 2
    cum_xi = np.zeros(len(xi2))
    cum_xi[1:] = tau * np.cumsum(xi2[1:])
    psi = np.array([
        free_energy(grid, phys.theta[m], traj.u[m], data.graph, data.coupling,
                    eps_potential=traj.eps_yosida)
        for m in range(traj.n_steps + 1)
    ])
    return {
        "t": traj.times,
        "v_h": v_h,
        "y_v": y_v,
        "alpha_grad_v2_cum": cum_grad,
        "u_h": u_h,
        "u_v2_cum": cum_u,
        "phi_int": phi_vals,
        "xi2_cum": cum_xi,
        "free_energy": psi,
    }


def terminal_diagnostics(traj: Trajectory, data: ProblemData) -> dict[str, float]:
    """Terminal values of the monitored series plus the composite energies.

    ``energy_composite`` is max over time of (||v||_H^2/2 + beta/4*||y||_V^2)
    plus the alpha-weighted dissipation; ``est2_composite`` is the time-sup
    of the integrated potential plus the accumulated ||xi||^2.  Uniform
    boundedness of these two composites over an alpha sweep is the discrete
    counterpart of the two a priori estimates; the alpha-weighted
    dissipation alone legitimately vanishes with alpha and is only
    meaningful inside its composite.
    """
    series = energy_monitor(traj, data)
    out = {key: float(series[key][-1]) for key in ENERGY_SERIES}
    core = 0.5 * series["v_h"] ** 2 + 0.25 * data.beta * series["y_v"] ** 2
    out["energy_composite"] = float(np.max(core) + series["alpha_grad_v2_cum"][-1])
    out["phi_int_max"] = float(np.max(series["phi_int"]))
    out["est2_composite"] = out["phi_int_max"] + out["xi2_cum"]
    return out


# diagnostics that the uniform estimates bound, hence subject to the
# max/min ratio check across a sweep
UNIFORM_DIAGNOSTICS = (
    "v_h", "y_v", "u_h", "u_v2_cum", "phi_int_max", "xi2_cum",
    "free_energy", "energy_composite", "est2_composite",
)


def diagnostic_ratios(per_alpha: dict[float, dict[str, float]]) -> dict[str, float]:
    """Max/min ratio of each terminal diagnostic across a sweep.

    Identically-zero series (an inactive obstacle or a merged run's xi) are
    reported as ratio 1; a diagnostic that vanishes for some alphas but not
    others is degenerate and raises.
    """
    ratios: dict[str, float] = {}
    keys = next(iter(per_alpha.values())).keys()
    for key in keys:
        vals = np.array([per_alpha[a][key] for a in per_alpha])
        vals = np.abs(vals)
        if np.all(vals == 0.0):
            ratios[key] = 1.0
            continue
        if np.any(vals == 0.0):
            raise DegenerateDataError(
                f"diagnostic {key} vanishes for some sweep values only"
            )
        ratios[key] = float(np.max(vals) / np.min(vals))
    return ratios
