"""Config parsing, rendering, artifacts, determinism, and exit codes."""

import os
from dataclasses import replace

import numpy as np
import pytest

from gn3phase.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    CheckFailure,
    RunConfig,
    main,
    parse_config,
    render_config,
    run,
)
from gn3phase.errors import ConfigError

CHEAP_SWEEP = """
command = sweep
scenario = s3_logarithmic
grid_n = 33
tau = 0.01
t_final = 0.2
alphas = 0.0625, 0.015625, 0.00390625
"""


class TestParse:
    def test_minimal_config_fills_defaults(self):
        config = parse_config("command = simulate\n")
        assert config.command == "simulate"
        assert config.scenario == "s1_smooth"
        assert config.grid_n == 257
        assert config.m_steps == 1000
        assert config.t_final == 1.0
        assert config.alphas == tuple(2.0**-k for k in range(4, 11))

    def test_comments_and_blank_lines(self):
        config = parse_config(
            "# full line comment\n\ncommand = mms  # trailing comment\n"
        )
        assert config.command == "mms"

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("command = simulate\n\nwibble = 3\n")

    def test_missing_command(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config("grid_n = 9\n")

    def test_alpha_bound_named_in_error(self):
        with pytest.raises(ConfigError, match=r"0 < alpha <= 1"):
            parse_config("command = simulate\nalpha = 1.5\n")

    def test_alpha_zero_is_the_limit_problem(self):
        config = parse_config("command = simulate\nalpha = 0\n")
        assert config.alpha == 0.0

    def test_inconsistent_steps_and_horizon_names_both_keys(self):
        with pytest.raises(ConfigError, match="m_steps.*t_final"):
            parse_config("command = simulate\ntau = 0.1\nm_steps = 7\nt_final = 1.0\n")

    def test_consistent_steps_and_horizon(self):
        config = parse_config("command = simulate\ntau = 0.1\nm_steps = 10\nt_final = 1.0\n")
        assert config.m_steps == 10

    def test_steps_only_derives_horizon(self):
        config = parse_config("command = simulate\ntau = 0.25\nm_steps = 8\n")
        assert config.t_final == pytest.approx(2.0)

    def test_non_whole_horizon_rejected(self):
        with pytest.raises(ConfigError, match="whole number"):
            parse_config("command = simulate\ntau = 0.3\nt_final = 1.0\n")

    def test_sweep_needs_three_points(self):
        with pytest.raises(ConfigError, match=">= 3 sweep points"):
            parse_config("command = sweep\nalphas = 0.5, 0.25\n")

    def test_ascending_alphas_rejected(self):
        with pytest.raises(ConfigError, match="descending"):
            parse_config("command = sweep\nalphas = 0.25, 0.5, 0.75\n")

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ConfigError, match="unknown scenario"):
            parse_config("command = simulate\nscenario = nope\n")

    def test_inline_scenario(self):
        config = parse_config(
            "command = simulate\n"
            "scenario.graph = double_obstacle\n"
            "scenario.lo = -1\n"
            "scenario.hi = 1\n"
        )
        assert config.scenario_inline["graph"] == "double_obstacle"

    def test_inline_and_named_scenario_conflict(self):
        with pytest.raises(ConfigError, match="either"):
            parse_config(
                "command = simulate\nscenario = s1_smooth\nscenario.graph = double_well\n"
            )

    def test_inline_scenario_validation(self):
        with pytest.raises(ConfigError, match="scenario.graph"):
            parse_config("command = simulate\nscenario.graph = cubic\n")
        with pytest.raises(ConfigError, match="kappa"):
            parse_config(
                "command = simulate\nscenario.graph = logarithmic\n"
                "scenario.kappa0 = 1.0\nscenario.kappa1 = 2.0\n"
            )

    def test_bad_value_type(self):
        with pytest.raises(ConfigError, match="cannot parse"):
            parse_config("command = simulate\ngrid_n = many\n")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("GN3_GRID_N", "65")
        config = parse_config("command = simulate\n")
        assert config.grid_n == 65

    def test_env_override_bad_value(self, monkeypatch):
        monkeypatch.setenv("GN3_GRID_N", "soup")
        with pytest.raises(ConfigError):
            parse_config("command = simulate\n")


class TestRoundTrip:
    @pytest.mark.parametrize("config", [
        RunConfig(command="simulate"),
        RunConfig(command="rates", scenario="s2_obstacle", grid_n=65, tau=0.005,
                  t_final=0.5, m_steps=100, alphas=(0.5, 0.25, 0.125),
                  schedule_rate=0.5, workers=4, out="results"),
        RunConfig(command="sweep", scenario_inline={"graph": "double_obstacle",
                                                    "lo": -1.0, "hi": 1.0},
                  alphas=(0.5, 0.25, 0.125)),
    ])
    def test_parse_render_identity(self, config, monkeypatch):
        for key in list(os.environ):
            if key.startswith("GN3_") and key != "GN3_NUMBA":
                monkeypatch.delenv(key)
        assert parse_config(render_config(config)) == config


class TestRun:
    def test_simulate_writes_trajectory(self, tmp_path):
        config = parse_config(
            "command = simulate\nscenario = stationary\ngrid_n = 9\n"
            "tau = 0.01\nm_steps = 5\nalpha = 0.5\n"
        )
        config = replace(config, out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,node_x,y,v,u,xi,w,theta"
        assert len(lines) == 1 + 6 * 9
        # stationary scenario: y stays 1, u stays 0 in every row
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[2] == "1" and cells[4] == "0"

    def test_sweep_writes_errors_and_is_deterministic(self, tmp_path):
        config = replace(parse_config(CHEAP_SWEEP), out=str(tmp_path / "a"))
        assert run(config) == EXIT_OK
        first = (tmp_path / "a" / "errors.csv").read_bytes()
        config2 = replace(config, out=str(tmp_path / "b"))
        assert run(config2) == EXIT_OK
        second = (tmp_path / "b" / "errors.csv").read_bytes()
        assert first == second

    def test_sweep_check_passes(self, tmp_path):
        config = replace(parse_config(CHEAP_SWEEP), out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK

    def test_rates_check_passes_cheap(self, tmp_path, capsys):
        text = CHEAP_SWEEP.replace("command = sweep", "command = rates")
        config = replace(parse_config(text), out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS rates check" in out
        assert "sqrt_group" in out
        rates = (tmp_path / "rates.csv").read_text().splitlines()
        assert rates[0] == "norm_kind,slope,residual,n_points"

    def test_rates_check_linear_thresholds(self, tmp_path, capsys):
        config = parse_config(
            "command = rates\nscenario = s1_smooth\ngrid_n = 65\ntau = 0.004\n"
            "t_final = 1.0\nalphas = 0.0625, 0.015625, 0.00390625, 0.0009765625\n"
        )
        config = replace(config, out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        out = capsys.readouterr().out
        assert "slope(linear_group)" in out and "in [0.9,1.2]: ok" in out
        assert "slope(strong_sqrt_group)" in out

    def test_energy_writes_series(self, tmp_path):
        text = CHEAP_SWEEP.replace("command = sweep", "command = energy")
        config = replace(parse_config(text), out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        header = (tmp_path / "energy.csv").read_text().splitlines()[0]
        assert header.startswith("alpha,step,t,v_h,y_v")

    def test_mms_runner_formats_report(self, tmp_path, monkeypatch, capsys):
        from gn3phase import cli as cli_mod
        from gn3phase.experiments import MmsReport

        stub = MmsReport(
            tau_rows=((1e-2, 2e-3, 2e-3), (5e-3, 1e-3, 1e-3)),
            dx_rows=((33, 1.0 / 32, 1e-3, 2.5e-4), (65, 1.0 / 64, 2.5e-4, 6e-5)),
            tau_slope_y=0.98, tau_slope_u=1.01, dx_slope_y=1.99, dx_slope_u=2.05,
        )
        monkeypatch.setattr(cli_mod, "mms_verify", lambda: stub)
        config = replace(parse_config("command = mms\n"), out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        assert "PASS mms check" in capsys.readouterr().out
        lines = (tmp_path / "mms.csv").read_text().splitlines()
        assert lines[0] == "study,grid_n,tau,err_y,err_u"
        assert len(lines) == 1 + 2 + 2

        bad = replace(stub, dx_slope_u=2.6)
        monkeypatch.setattr(cli_mod, "mms_verify", lambda: bad)
        assert run(config, check=True) == EXIT_CHECK_FAILED

    def test_norm_selection_filters_rows(self, tmp_path):
        config = replace(parse_config(CHEAP_SWEEP), out=str(tmp_path),
                         norms="y:W1infT:H; sqrt_group")
        assert run(config) == EXIT_OK
        lines = (tmp_path / "errors.csv").read_text().splitlines()[1:]
        kinds = {line.split(",")[1] for line in lines}
        assert kinds == {"y:W1infT:H", "sqrt_group"}

    def test_unknown_norm_selection(self, tmp_path):
        config = replace(parse_config(CHEAP_SWEEP), out=str(tmp_path), norms="bogus")
        with pytest.raises(ConfigError, match="norms"):
            run(config)

    def test_inline_scenario_end_to_end(self, tmp_path):
        config = parse_config(
            "command = sweep\n"
            "scenario.graph = logarithmic\n"
            "scenario.kappa0 = 3.0\n"
            "scenario.kappa1 = 0.5\n"
            "grid_n = 33\ntau = 0.01\nt_final = 0.2\n"
            "alphas = 0.0625, 0.015625, 0.00390625\n"
            "schedule_rate = 0.5\n"
        )
        config = replace(config, out=str(tmp_path))
        assert run(config, check=True) == EXIT_OK
        lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert len(lines) > 1


class TestMain:
    def test_exit_ok_and_artifacts(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CHEAP_SWEEP)
        assert main(["--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert (tmp_path / "out" / "errors.csv").exists()

    def test_exit_config_error_on_bad_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("command = sweep\nalphas = 0.5, 0.25\n")
        assert main(["--config", str(cfg)]) == EXIT_CONFIG
        assert "sweep points" in capsys.readouterr().err

    def test_exit_config_error_on_missing_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG

    def test_exit_check_failure(self, tmp_path, monkeypatch, capsys):
        from gn3phase import cli

        def failing_runner(config, out_dir, check):
            raise CheckFailure(["FAIL fabricated check"])

        monkeypatch.setitem(cli._RUNNERS, "sweep", failing_runner)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CHEAP_SWEEP)
        assert main(["--config", str(cfg), "--check",
                     "--out", str(tmp_path / "o")]) == EXIT_CHECK_FAILED
        assert "FAIL" in capsys.readouterr().out

    def test_exit_numerical_failure(self, tmp_path, monkeypatch, capsys):
        from gn3phase import cli
        from gn3phase.errors import ConvergenceError

        def exploding_runner(config, out_dir, check):
            raise ConvergenceError("phase Newton iteration ... at step 3")

        monkeypatch.setitem(cli._RUNNERS, "sweep", exploding_runner)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CHEAP_SWEEP)
        assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
        assert "step 3" in capsys.readouterr().err

    def test_usage_error(self):
        assert main([]) == EXIT_CONFIG
