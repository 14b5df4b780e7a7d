"""Tests for thinsieve.cli module."""

import json
from pathlib import Path
from typing import Any
from unittest.mock import patch

import pytest
from click.testing import CliRunner, Result

from thinsieve import __version__
from thinsieve.cli import main
from thinsieve.constants import R_TABLE
from thinsieve.dhr import plan_sieve, r_table
from thinsieve.orbit import BudgetExceeded

TRIVIAL_CONFIG = {
    "version": "1",
    "group": {"label": "trivial", "generators": [], "base_point": [3, 4, 5]},
    "radii": [10],
}


@pytest.fixture
def runner() -> CliRunner:
    """Create a Click CLI test runner."""
    return CliRunner()


@pytest.fixture
def trivial_config(tmp_path: Path) -> Path:
    """A config for the trivial group, whose orbit is {(3, 4, 5)}."""
    path = tmp_path / "trivial.json"
    path.write_text(json.dumps(TRIVIAL_CONFIG))
    return path


def _error(result: Result) -> dict[str, Any]:
    return json.loads(result.stderr.strip().splitlines()[-1])


class TestCliHelp:
    """Tests for help and version output."""

    def test_help_lists_commands(self, runner: CliRunner) -> None:
        """Help describes the tool and lists every subcommand."""
        result = runner.invoke(main, ["--help"])

        assert result.exit_code == 0
        assert "thinsieve" in result.output
        for command in (
            "orbit",
            "count",
            "local-density",
            "ramified",
            "primitivity",
            "sieve-table",
            "sieve-r",
            "delta-threshold",
            "census",
            "figure",
        ):
            assert command in result.output

    def test_version(self, runner: CliRunner) -> None:
        """--version prints the package version."""
        result = runner.invoke(main, ["--version"])

        assert result.exit_code == 0
        assert __version__ in result.output


class TestOrbitCommands:
    """Tests for orbit and count."""

    def test_trivial_group_orbit(self, runner: CliRunner, trivial_config: Path) -> None:
        """The trivial group prints a single-point CSV."""
        result = runner.invoke(main, ["--config", str(trivial_config), "orbit"])

        assert result.exit_code == 0
        lines = result.stdout.splitlines()
        assert lines[0].startswith("# thinsieve points schema 1")
        assert lines[1:] == ["x,y,z", "3,4,5"]

    def test_full_orbit_points(self, runner: CliRunner) -> None:
        """46 points of the full orbit lie below T = 100."""
        result = runner.invoke(main, ["orbit", "--radius", "100"])

        assert result.exit_code == 0
        assert len(result.stdout.splitlines()) == 2 + 46

    def test_count_to_stdout(self, runner: CliRunner) -> None:
        """Counts go to stdout as one JSON document."""
        result = runner.invoke(
            main, ["count", "--radius", "1000", "--radius", "100"]
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["counts"] == [{"T": 100.0, "N": 46}, {"T": 1000.0, "N": 454}]

    def test_count_to_out_dir(self, runner: CliRunner, tmp_path: Path) -> None:
        """With --out-dir the counts and fits are written as files."""
        out = tmp_path / "run"

        result = runner.invoke(main, ["--out-dir", str(out), "count"])

        assert result.exit_code == 0
        assert "Wrote" in result.stderr
        counts = json.loads((out / "counts.json").read_text())
        fits = json.loads((out / "fit.json").read_text())
        assert [entry["N"] for entry in counts][:2] == [46, 454]
        assert len(counts) == 3
        assert 0.95 < fits[0]["delta_hat"] < 1.05

    def test_budget_exceeded_exits_3(self, runner: CliRunner) -> None:
        """Computation failures are reported with exit code 3."""
        with patch(
            "thinsieve.cli.enumerate_orbit", side_effect=BudgetExceeded("too many")
        ):
            result = runner.invoke(main, ["orbit"])

        assert result.exit_code == 3
        assert _error(result) == {
            "error": "BudgetExceeded",
            "message": "too many",
            "exit_code": 3,
        }


class TestCongruenceCommands:
    """Tests for local-density, ramified and primitivity."""

    def test_local_density(self, runner: CliRunner) -> None:
        """g^FC(13) = 3/7 with its closed form alongside."""
        result = runner.invoke(
            main, ["local-density", "--function", "FC", "--primes", "13"]
        )

        assert result.exit_code == 0
        entry = json.loads(result.stdout)["entries"][0]
        assert (entry["num"], entry["den"]) == (3, 7)
        assert entry["closed_form"] == {"num": 3, "den": 7}

    def test_local_density_oracle(self, runner: CliRunner) -> None:
        """Every odd prime up to 13 agrees with the cone count."""
        result = runner.invoke(
            main, ["local-density", "--function", "FA", "--primes", "3..13", "--oracle"]
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["ramified"] == [2]
        assert [e["q"] for e in data["entries"]] == [3, 5, 7, 11, 13]
        assert all(e["agrees"] for e in data["entries"])

    def test_local_density_rejects_square(self, runner: CliRunner) -> None:
        """A non-square-free modulus exits with code 2 and a JSON error."""
        result = runner.invoke(main, ["local-density", "--primes", "4"])

        assert result.exit_code == 2
        error = _error(result)
        assert error["error"] == "ModulusError"
        assert error["exit_code"] == 2

    def test_local_density_bad_moduli(self, runner: CliRunner) -> None:
        """Unparseable moduli are an input error."""
        result = runner.invoke(main, ["local-density", "--primes", "a..b"])

        assert result.exit_code == 2
        assert "Invalid moduli" in _error(result)["message"]

    def test_ramified(self, runner: CliRunner) -> None:
        """The full orbit is unramified at odd primes."""
        result = runner.invoke(main, ["ramified", "--p-max", "13"])

        assert result.exit_code == 0
        assert json.loads(result.stdout)["ramified"] == [2]

    def test_primitivity_fails_on_trivial_group(
        self, runner: CliRunner, trivial_config: Path
    ) -> None:
        """F_H ≡ 5 on the trivial orbit."""
        result = runner.invoke(
            main,
            ["--config", str(trivial_config), "primitivity", "--function", "FH"],
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["ok"] is False
        assert data["failing_modulus"] == 5


class TestSieveCommands:
    """Tests for sieve-table, sieve-r and delta-threshold."""

    def test_sieve_table_text(self, runner: CliRunner) -> None:
        """The text table has a header, a rule and 21 rows, all matching."""
        result = runner.invoke(main, ["sieve-table"])

        assert result.exit_code == 0
        assert len(result.stdout.splitlines()) == 23
        assert "differ" not in result.stderr

    def test_sieve_table_json(self, runner: CliRunner) -> None:
        """--json emits one object per row."""
        result = runner.invoke(main, ["sieve-table", "--json"])

        rows = json.loads(result.stdout)
        assert len(rows) == 21
        assert all(row["matches"] for row in rows)

    def test_sieve_table_reports_mismatch(self, runner: CliRunner) -> None:
        """Rows that differ from the printed values are counted on stderr."""
        altered = [{**R_TABLE[0], "R": 99}]

        with patch("thinsieve.cli.r_table", return_value=r_table(altered)):
            result = runner.invoke(main, ["sieve-table"])

        assert result.exit_code == 0
        assert "1 rows differ" in result.stderr

    def test_sieve_r(self, runner: CliRunner) -> None:
        """κ = 1, δ = 1, θ = 5/6 gives μ = 12 and R = 14."""
        result = runner.invoke(
            main,
            ["sieve-r", "--kappa", "1", "--delta", "1", "--theta", "5/6"],
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["mu"] == pytest.approx(12)
        assert data["R"] == 14
        assert data["delta_source"] == "flag"

    def test_sieve_r_goes_through_plan(self, runner: CliRunner) -> None:
        """sieve-r builds a SievePlan and reports its μ, τ and mode."""
        args = ["sieve-r", "--kappa", "5", "--delta", "1", "--theta", "1/2"]

        with patch("thinsieve.cli.plan_sieve", wraps=plan_sieve) as planned:
            result = runner.invoke(main, [*args, "--mode", "finite"])

        assert result.exit_code == 0
        planned.assert_called_once()
        data = json.loads(result.stdout)
        assert data["mode"] == "finite"
        assert (data["mu"], data["tau"]) == pytest.approx((4.0, 0.25))

    def test_sieve_r_delta_from_config(self, runner: CliRunner, tmp_path: Path) -> None:
        """sieve.delta in the config is used when no flag is given."""
        path = tmp_path / "run.json"
        sieve = {"delta": 1, "theta": "1/2", "mode": "finite"}
        path.write_text(json.dumps({"version": "1", "sieve": sieve}))

        result = runner.invoke(main, ["--config", str(path), "sieve-r"])

        data = json.loads(result.stdout)
        assert data["delta_source"] == "config"
        assert data["mu"] == pytest.approx(4)
        assert data["R"] == 6

    def test_sieve_r_unsupported_kappa(self, runner: CliRunner) -> None:
        """κ = 2 has no constants."""
        result = runner.invoke(main, ["sieve-r", "--kappa", "2", "--delta", "1"])

        assert result.exit_code == 2
        assert _error(result)["error"] == "UnsupportedDimension"

    def test_delta_threshold(self, runner: CliRunner) -> None:
        """R = 14 for F_H needs δ just below 1 at θ = 5/6."""
        result = runner.invoke(
            main,
            ["delta-threshold", "--r", "14", "--kappa", "1", "--theta", "5/6"],
        )

        assert result.exit_code == 0
        (row,) = json.loads(result.stdout)
        assert row["delta"] == pytest.approx(0.9992, abs=2e-3)


class TestCensusCommands:
    """Tests for census and figure."""

    def test_census(self, runner: CliRunner) -> None:
        """Ω summaries of F_H below T = 100."""
        result = runner.invoke(
            main, ["census", "--radius", "100", "--function", "FH", "--r", "1"]
        )

        assert result.exit_code == 0
        (summary,) = json.loads(result.stdout)["summaries"]
        assert summary["R"] == 1
        assert summary["total"] == 46
        assert summary["zeros"] == 0

    def test_census_writes_csv(self, runner: CliRunner, tmp_path: Path) -> None:
        """With --out-dir a per-point CSV is written too."""
        result = runner.invoke(
            main,
            ["--out-dir", str(tmp_path), "census", "--radius", "100", "--r", "4"],
        )

        assert result.exit_code == 0
        assert (tmp_path / "census_FH.json").exists()
        lines = (tmp_path / "census_FH.csv").read_text().splitlines()
        assert lines[1] == "x,y,z,F,omega"
        assert len(lines) == 2 + 46

    def test_figure_svg_needs_out_dir(self, runner: CliRunner) -> None:
        """--svg without --out-dir is an input error."""
        result = runner.invoke(main, ["figure", "--svg"])

        assert result.exit_code == 2
        assert "--out-dir" in _error(result)["message"]

    def test_figure_files(self, runner: CliRunner, tmp_path: Path) -> None:
        """figure writes the CSV dataset and the SVG scatter."""
        result = runner.invoke(
            main,
            ["--out-dir", str(tmp_path), "figure", "--radius", "300", "--svg"],
        )

        assert result.exit_code == 0
        assert (tmp_path / "figure.csv").exists()
        assert (tmp_path / "figure.svg").exists()


class TestCliConfig:
    """Tests for config loading and logging setup."""

    def test_missing_config_file(self, runner: CliRunner, tmp_path: Path) -> None:
        """An unreadable config exits with code 2."""
        result = runner.invoke(
            main, ["--config", str(tmp_path / "absent.json"), "ramified"]
        )

        assert result.exit_code == 2
        assert _error(result)["error"] == "ConfigValidationError"

    def test_unknown_preset_choice(self, runner: CliRunner) -> None:
        """--preset only accepts shipped presets."""
        result = runner.invoke(main, ["--preset", "apollonian", "ramified"])

        assert result.exit_code == 2
        assert "Invalid value" in result.output

    def test_non_positive_threads(self, runner: CliRunner) -> None:
        """--threads 0 is rejected."""
        result = runner.invoke(main, ["--threads", "0", "ramified"])

        assert result.exit_code == 2
        assert "--threads" in _error(result)["message"]

    def test_log_level_from_environment(self, runner: CliRunner) -> None:
        """THINSIEVE_LOG=DEBUG sends debug records to stderr."""
        result = runner.invoke(
            main, ["ramified", "--p-max", "5"], env={"THINSIEVE_LOG": "DEBUG"}
        )

        assert result.exit_code == 0
        assert "[DEBUG] thinsieve.cli: Effective config" in result.stderr
        assert json.loads(result.stdout)["ramified"] == [2]

    def test_invalid_log_level(self, runner: CliRunner) -> None:
        """Unknown levels fall back to WARNING with a warning."""
        result = runner.invoke(
            main, ["ramified", "--p-max", "5"], env={"THINSIEVE_LOG": "LOUD"}
        )

        assert result.exit_code == 0
        assert "Ignoring THINSIEVE_LOG='LOUD'" in result.stderr
