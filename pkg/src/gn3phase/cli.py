"""Batch front-end: flat-file configs in, CSV artifacts and summaries out.

Configuration files hold ``key = value`` lines; ``#`` starts a comment and
blank lines are skipped.  A custom scenario can be given inline through
dotted ``scenario.*`` keys instead of a registry name.  Every key can be
overridden by an environment variable with the ``GN3_`` prefix (``grid_n``
becomes ``GN3_GRID_N``); command-line flags override both.

Commands and their artifacts (all CSV, numbers at 17 significant digits so
repeated runs are byte-identical):

* simulate -> trajectory.csv   (t, node_x, y, v, u, xi, w, theta; long form)
* sweep    -> errors.csv       (alpha, norm_kind, error)
* rates    -> errors.csv + rates.csv (norm_kind, slope, residual, n_points)
* mms      -> mms.csv          (refinement table)
* energy   -> energy.csv       (per-step diagnostics per alpha)

With ``--check`` each command additionally prints one PASS/FAIL summary
line against its documented thresholds and the exit code reports the
outcome: 0 ok, 1 check failure, 2 usage or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError, DegenerateDataError, Gn3Error
from .experiments import (
    DEFAULT_ALPHAS,
    MMS_DX_SLOPE_RANGE,
    MMS_TAU_FINE,
    MMS_TAU_SLOPE_RANGE,
    SCENARIOS,
    UNIFORM_DIAGNOSTICS,
    Scenario,
    diagnostic_ratios,
    energy_monitor,
    get_scenario,
    mms_verify,
    rate_study,
    sweep,
    terminal_diagnostics,
)
from .monotone import DoubleObstacle, DoubleWell, Logarithmic, default_coupling
from .solver import reconstruct_physical, simulate

__all__ = ["RunConfig", "parse_config", "render_config", "run", "main"]

COMMANDS = ("simulate", "sweep", "rates", "mms", "energy")
ENV_PREFIX = "GN3_"

# thresholds used in --check mode, per rate annotation
CHECK_LINEAR_RANGE = (0.9, 1.2)
CHECK_SQRT_MIN = 0.45
CHECK_RATIO_MAX = 2.0
CHECK_MONOTONE_SLACK = 1.05

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; see module docstring for the file format."""

    command: str
    scenario: str = "s1_smooth"
    scenario_inline: dict | None = None
    grid_n: int = 257
    tau: float = 1e-3
    t_final: float = 1.0
    m_steps: int = 1000
    alpha: float = 0.25
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    norms: str = "all"
    out: str = "out"
    workers: int = 1
    seed: int = 0  # reserved; the solver is deterministic
    schedule_rate: float | None = None


_SCENARIO_KEYS = {
    "name": str, "graph": str, "kappa": float, "kappa0": float,
    "kappa1": float, "lo": float, "hi": float, "smooth": bool,
}

_TOP_KEYS = {
    "command": str, "scenario": str, "grid_n": int, "tau": float,
    "t_final": float, "m_steps": int, "alpha": float, "alphas": "floats",
    "norms": str, "out": str, "workers": int, "seed": int,
    "schedule_rate": float,
}


def _parse_value(key: str, raw: str, kind, line_no: int):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(part) for part in raw.split(",") if part.strip())
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(
            f"line {line_no}: cannot parse value {raw.strip()!r} for key {key!r}"
        ) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat config; raises ConfigError naming the issue."""
    values: dict = {}
    inline: dict = {}
    seen_m = seen_t = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key.startswith("scenario."):
            sub = key[len("scenario."):]
            if sub not in _SCENARIO_KEYS:
                raise ConfigError(f"line {line_no}: unknown scenario key {key!r}")
            inline[sub] = _parse_value(key, raw, _SCENARIO_KEYS[sub], line_no)
            continue
        if key not in _TOP_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, _TOP_KEYS[key], line_no)
        seen_m = seen_m or key == "m_steps"
        seen_t = seen_t or key == "t_final"
    return build_config(values, inline or None, seen_m=seen_m, seen_t=seen_t)


def _apply_env_overrides(values: dict, seen_m: bool, seen_t: bool):
    for key, kind in _TOP_KEYS.items():
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env is None:
            continue
        values[key] = _parse_value(key, env, kind, 0)
        seen_m = seen_m or key == "m_steps"
        seen_t = seen_t or key == "t_final"
    return values, seen_m, seen_t


def build_config(values: dict, inline: dict | None, *, seen_m: bool,
                 seen_t: bool, use_env: bool = True) -> RunConfig:
    if use_env:
        values, seen_m, seen_t = _apply_env_overrides(values, seen_m, seen_t)
    if "command" not in values:
        raise ConfigError("missing mandatory key 'command'")
    command = values["command"]
    if command not in COMMANDS:
        raise ConfigError(f"key 'command': unknown command {command!r}; choose from {COMMANDS}")
    if inline is not None and "scenario" in values:
        raise ConfigError("give either a scenario name or inline scenario.* keys, not both")

    tau = float(values.get("tau", RunConfig.tau))
    if tau <= 0.0:
        raise ConfigError(f"key 'tau': time step must be positive, got {tau}")
    if not seen_m and not seen_t:
        # defaults supply t_final
        seen_t = True
        values.setdefault("t_final", RunConfig.t_final)
    if seen_m and seen_t:
        m, t = int(values["m_steps"]), float(values["t_final"])
        if abs(m * tau - t) > 1e-12 * max(abs(t), 1.0):
            raise ConfigError(
                f"keys 'm_steps' and 't_final' are inconsistent: {m} * {tau} != {t}"
            )
    elif seen_m:
        m = int(values["m_steps"])
        values["t_final"] = m * tau
    else:
        t = float(values["t_final"])
        m = int(round(t / tau))
        if abs(m * tau - t) > 1e-12 * max(abs(t), 1.0):
            raise ConfigError(
                f"keys 't_final' and 'tau': horizon {t} is not a whole number of steps of {tau}"
            )
        values["m_steps"] = m
    if values["m_steps"] < 0:
        raise ConfigError(f"key 'm_steps': must be nonnegative, got {values['m_steps']}")

    alpha = float(values.get("alpha", RunConfig.alpha))
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(
            f"key 'alpha': the damping coefficient must satisfy 0 < alpha <= 1 "
            f"(0 selects the limit problem), got {alpha}"
        )
    alphas = tuple(values.get("alphas", DEFAULT_ALPHAS))
    if any(not 0.0 < a <= 1.0 for a in alphas):
        raise ConfigError("key 'alphas': every sweep value must satisfy 0 < alpha <= 1")
    if any(a1 <= a2 for a1, a2 in zip(alphas, alphas[1:])):
        raise ConfigError("key 'alphas': sweep values must be strictly descending")
    if command in ("sweep", "rates", "energy") and len(alphas) < 3:
        raise ConfigError(f"key 'alphas': need >= 3 sweep points, got {len(alphas)}")
    grid_n = int(values.get("grid_n", RunConfig.grid_n))
    if grid_n < 3:
        raise ConfigError(f"key 'grid_n': need at least 3 nodes, got {grid_n}")
    workers = int(values.get("workers", RunConfig.workers))
    if workers < 1:
        raise ConfigError(f"key 'workers': need at least 1, got {workers}")
    rate = values.get("schedule_rate")
    if rate is not None and rate not in (0.0, 0.5, 1.0):
        raise ConfigError(f"key 'schedule_rate': must be one of 0, 0.5, 1, got {rate}")
    scenario_name = values.get("scenario", RunConfig.scenario)
    if inline is None and scenario_name not in SCENARIOS:
        raise ConfigError(
            f"key 'scenario': unknown scenario {scenario_name!r}; available: {sorted(SCENARIOS)}"
        )
    if inline is not None:
        _validate_inline(inline)
    return RunConfig(
        command=command,
        scenario=scenario_name,
        scenario_inline=inline,
        grid_n=grid_n,
        tau=tau,
        t_final=float(values["t_final"]),
        m_steps=int(values["m_steps"]),
        alpha=alpha,
        alphas=alphas,
        norms=str(values.get("norms", RunConfig.norms)),
        out=str(values.get("out", RunConfig.out)),
        workers=workers,
        seed=int(values.get("seed", RunConfig.seed)),
        schedule_rate=rate,
    )


_GRAPH_NAMES = ("double_well", "double_obstacle", "logarithmic")


def _validate_inline(inline: dict):
    graph = inline.get("graph")
    if graph not in _GRAPH_NAMES:
        raise ConfigError(
            f"key 'scenario.graph': must be one of {_GRAPH_NAMES}, got {graph!r}"
        )
    if graph == "logarithmic":
        k0 = inline.get("kappa0", 2.0)
        k1 = inline.get("kappa1", 1.0)
        if not 0.0 < k1 < k0:
            raise ConfigError(
                f"keys 'scenario.kappa0/kappa1': need 0 < kappa1 < kappa0, got {k0}, {k1}"
            )
    if graph == "double_obstacle":
        lo = inline.get("lo", -1.0)
        hi = inline.get("hi", 1.0)
        if not lo < hi or not lo <= 0.0 <= hi:
            raise ConfigError(
                f"keys 'scenario.lo/hi': need lo < hi with 0 inside, got {lo}, {hi}"
            )


def _format(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def render_config(config: RunConfig) -> str:
    """Inverse of parse_config; parse(render(c)) == c for every valid config."""
    lines = [f"command = {config.command}"]
    if config.scenario_inline is None:
        lines.append(f"scenario = {config.scenario}")
    else:
        for key in sorted(config.scenario_inline):
            lines.append(f"scenario.{key} = {_format(config.scenario_inline[key])}")
    lines.append(f"grid_n = {config.grid_n}")
    lines.append(f"tau = {_format(config.tau)}")
    lines.append(f"t_final = {_format(config.t_final)}")
    lines.append(f"m_steps = {config.m_steps}")
    lines.append(f"alpha = {_format(config.alpha)}")
    lines.append("alphas = " + ", ".join(_format(a) for a in config.alphas))
    lines.append(f"norms = {config.norms}")
    lines.append(f"out = {config.out}")
    lines.append(f"workers = {config.workers}")
    lines.append(f"seed = {config.seed}")
    if config.schedule_rate is not None:
        lines.append(f"schedule_rate = {_format(config.schedule_rate)}")
    return "\n".join(lines) + "\n"


def _build_scenario(config: RunConfig) -> Scenario:
    overrides = dict(grid_n=config.grid_n, tau=config.tau, t_final=config.t_final)
    if config.schedule_rate is not None:
        overrides["schedule_rate"] = config.schedule_rate
    if config.scenario_inline is None:
        return get_scenario(config.scenario, **overrides)
    inline = config.scenario_inline
    kind = inline["graph"]
    if kind == "double_well":
        graph = DoubleWell(kappa=inline.get("kappa", 1.0))
    elif kind == "double_obstacle":
        graph = DoubleObstacle(lo=inline.get("lo", -1.0), hi=inline.get("hi", 1.0))
    else:
        graph = Logarithmic(kappa0=inline.get("kappa0", 2.0), kappa1=inline.get("kappa1", 1.0))
    return Scenario(
        name=inline.get("name", "inline"),
        graph=graph,
        coupling=default_coupling(graph),
        grid_n=config.grid_n,
        tau=config.tau,
        t_final=config.t_final,
        schedule_rate=config.schedule_rate,
        smooth_gamma=inline.get("smooth"),
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_format(cell) for cell in row) + "\n")


def _selected_kinds(config: RunConfig, available) -> list[str]:
    if config.norms.strip().lower() == "all":
        return list(available)
    wanted = [part.strip() for part in config.norms.split(";") if part.strip()]
    unknown = [k for k in wanted if k not in available]
    if unknown:
        raise ConfigError(f"key 'norms': unknown norm kind(s) {unknown}; available: {list(available)}")
    return wanted


def _run_simulate(config: RunConfig, out_dir: Path, check: bool) -> list[str]:
    scenario = _build_scenario(config)
    grid = scenario.make_grid()
    data = scenario.problem_data(config.alpha, grid)
    traj = simulate(data, grid, config.tau, config.m_steps)
    phys = reconstruct_physical(traj)
    times = traj.times
    rows = (
        (times[m], grid.x[i], traj.y[m, i], traj.v[m, i], traj.u[m, i],
         traj.xi[m, i], phys.w[m, i], phys.theta[m, i])
        for m in range(config.m_steps + 1)
        for i in range(grid.n)
    )
    _write_csv(out_dir / "trajectory.csv",
               ["t", "node_x", "y", "v", "u", "xi", "w", "theta"], rows)
    summaries = [f"simulate: wrote {out_dir / 'trajectory.csv'} "
                 f"({(config.m_steps + 1) * grid.n} rows)"]
    if check:
        ident = float(np.max(np.abs(phys.e - (phys.theta + traj.u))))
        scheme = float(np.max(np.abs(traj.y[1:] - traj.y[:-1] - config.tau * traj.v[1:])))
        f_means = np.zeros(config.m_steps)
        if data.f is not None:
            for m in range(1, config.m_steps + 1):
                f_means[m - 1] = grid.mean(data.f(grid.x, m * config.tau))
        drift = np.abs(
            grid.mean(traj.v) - grid.mean(traj.v[0])
            - config.tau * np.concatenate(([0.0], np.cumsum(f_means)))
        )
        conserve = float(np.max(drift))
        ok = ident == 0.0 and scheme == 0.0 and conserve <= 1e-10
        summaries.append(
            f"{'PASS' if ok else 'FAIL'} simulate checks: enthalpy identity {ident:.1e}, "
            f"scheme identity {scheme:.1e}, mean conservation {conserve:.1e} (<= 1e-10)"
        )
        if not ok:
            raise CheckFailure(summaries)
    return summaries


class CheckFailure(Exception):
    """Carries already-built summary lines for a failed --check run."""

    def __init__(self, summaries):
        super().__init__("check failed")
        self.summaries = summaries


def _error_rows(reports, kinds):
    for alpha, rep in reports:
        merged = {**rep.errors, **rep.groups, "hat_data": rep.hat_data}
        for kind in kinds:
            yield (alpha, kind, merged[kind])


def _run_sweep(config: RunConfig, out_dir: Path, check: bool) -> list[str]:
    scenario = _build_scenario(config)
    reports = sweep(scenario, config.alphas, workers=config.workers)
    available = list(reports[0][1].errors) + list(reports[0][1].groups) + ["hat_data"]
    kinds = _selected_kinds(config, available)
    _write_csv(out_dir / "errors.csv", ["alpha", "norm_kind", "error"],
               _error_rows(reports, kinds))
    summaries = [f"sweep: wrote {out_dir / 'errors.csv'} ({len(reports)} sweep points)"]
    if check:
        worst = 0.0
        worst_kind = ""
        for kind in reports[0][1].errors:
            errs = [rep.errors[kind] for _, rep in reports]
            for e_coarse, e_fine in zip(errs, errs[1:]):
                if e_coarse > 0:
                    ratio = e_fine / e_coarse
                    if ratio > worst:
                        worst, worst_kind = ratio, kind
        ok = worst <= CHECK_MONOTONE_SLACK
        summaries.append(
            f"{'PASS' if ok else 'FAIL'} sweep check: errors decay along the sweep, "
            f"worst step ratio {worst:.3f} ({worst_kind}) <= {CHECK_MONOTONE_SLACK}"
        )
        if not ok:
            raise CheckFailure(summaries)
    return summaries


def _run_rates(config: RunConfig, out_dir: Path, check: bool) -> list[str]:
    scenario = _build_scenario(config)
    reports = sweep(scenario, config.alphas, workers=config.workers)
    report = rate_study(scenario, config.alphas, reports=reports)
    available = list(reports[0][1].errors) + list(reports[0][1].groups) + ["hat_data"]
    _write_csv(out_dir / "errors.csv", ["alpha", "norm_kind", "error"],
               _error_rows(reports, available))
    kinds = _selected_kinds(config, list(report.fits))
    _write_csv(
        out_dir / "rates.csv",
        ["norm_kind", "slope", "residual", "n_points"],
        ((kind, report.fits[kind].slope, report.fits[kind].residual,
          report.fits[kind].n_used) for kind in kinds),
    )
    summaries = [
        f"rates: wrote {out_dir / 'rates.csv'} (annotation: {report.annotation})"
    ]
    if check:
        lines = []
        ok = True
        if report.annotation == "linear_rate_hypotheses":
            slope = report.fits["linear_group"].slope
            lo, hi = CHECK_LINEAR_RANGE
            good = lo <= slope <= hi
            ok &= good
            lines.append(f"slope(linear_group)={slope:.4f} in [{lo},{hi}]: {'ok' if good else 'BAD'}")
            strong = report.fits["strong_sqrt_group"].slope
            good = strong >= CHECK_SQRT_MIN
            ok &= good
            lines.append(
                f"slope(strong_sqrt_group)={strong:.4f} >= {CHECK_SQRT_MIN}: {'ok' if good else 'BAD'}"
            )
        else:
            slope = report.fits["sqrt_group"].slope
            good = slope >= CHECK_SQRT_MIN
            ok &= good
            lines.append(f"slope(sqrt_group)={slope:.4f} >= {CHECK_SQRT_MIN}: {'ok' if good else 'BAD'}")
        summaries.append(f"{'PASS' if ok else 'FAIL'} rates check: " + "; ".join(lines))
        if not ok:
            raise CheckFailure(summaries)
    return summaries


def _run_mms(config: RunConfig, out_dir: Path, check: bool) -> list[str]:
    report = mms_verify()
    n_fine = max(n for n, *_ in report.dx_rows)
    rows = [("tau", n_fine, tau, ey, eu) for tau, ey, eu in report.tau_rows]
    rows += [("dx", n, MMS_TAU_FINE, ey, eu) for n, _, ey, eu in report.dx_rows]
    _write_csv(out_dir / "mms.csv", ["study", "grid_n", "tau", "err_y", "err_u"], rows)
    summaries = [
        f"mms: wrote {out_dir / 'mms.csv'}; tau slopes (y, u) = "
        f"({report.tau_slope_y:.3f}, {report.tau_slope_u:.3f}), dx slopes = "
        f"({report.dx_slope_y:.3f}, {report.dx_slope_u:.3f})"
    ]
    if check:
        ok = report.passed
        summaries.append(
            f"{'PASS' if ok else 'FAIL'} mms check: tau slopes in "
            f"[{MMS_TAU_SLOPE_RANGE[0]},{MMS_TAU_SLOPE_RANGE[1]}], dx slopes in "
            f"[{MMS_DX_SLOPE_RANGE[0]},{MMS_DX_SLOPE_RANGE[1]}]"
        )
        if not ok:
            raise CheckFailure(summaries)
    return summaries


def _run_energy(config: RunConfig, out_dir: Path, check: bool) -> list[str]:
    scenario = _build_scenario(config)
    grid = scenario.make_grid()
    _, _, runs = sweep(scenario, config.alphas, workers=config.workers,
                       keep_trajectories=True)
    series_keys = ["v_h", "y_v", "alpha_grad_v2_cum", "u_h", "u_v2_cum",
                   "phi_int", "xi2_cum", "free_energy"]

    def rows():
        for alpha in config.alphas:
            data = scenario.problem_data(alpha, grid)
            series = energy_monitor(runs[alpha], data)
            for m in range(config.m_steps + 1):
                yield (alpha, m, series["t"][m], *(series[k][m] for k in series_keys))

    _write_csv(out_dir / "energy.csv", ["alpha", "step", "t", *series_keys], rows())
    summaries = [f"energy: wrote {out_dir / 'energy.csv'}"]
    if check:
        diags = {
            a: terminal_diagnostics(runs[a], scenario.problem_data(a, grid))
            for a in config.alphas
        }
        ratios = diagnostic_ratios(diags)
        worst_key = max(UNIFORM_DIAGNOSTICS, key=lambda k: ratios[k])
        worst = ratios[worst_key]
        ok = worst <= CHECK_RATIO_MAX
        summaries.append(
            f"{'PASS' if ok else 'FAIL'} energy check: max/min ratio of uniform "
            f"diagnostics {worst:.3f} ({worst_key}) <= {CHECK_RATIO_MAX}"
        )
        if not ok:
            raise CheckFailure(summaries)
    return summaries


_RUNNERS = {
    "simulate": _run_simulate,
    "sweep": _run_sweep,
    "rates": _run_rates,
    "mms": _run_mms,
    "energy": _run_energy,
}


def run(config: RunConfig, *, check: bool = False) -> int:
    """Execute one command; prints summaries and returns the exit code."""
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        summaries = _RUNNERS[config.command](config, out_dir, check)
    except CheckFailure as failure:
        for line in failure.summaries:
            print(line)
        return EXIT_CHECK_FAILED
    for line in summaries:
        print(line)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gn3phase",
        description="phase field runs, damping-coefficient sweeps and verification checks",
    )
    parser.add_argument("--config", required=True, help="path to a key = value config file")
    parser.add_argument("--check", action="store_true",
                        help="evaluate pass/fail summaries against the documented thresholds")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("--workers", type=int, default=None,
                        help="sweep-point parallelism (overrides the config)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
        if args.out is not None:
            config = replace(config, out=args.out)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(f"--workers: need at least 1, got {args.workers}")
            config = replace(config, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(config, check=args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DegenerateDataError, Gn3Error, FloatingPointError) as exc:
        print(f"numerical failure ({config.command}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
