"""Tests for the ruinsim command line."""

import json

import pytest
from typer.testing import CliRunner

from core import __version__
from main import VALIDATION_EXIT_CODE, app
from test_runner import payload

runner = CliRunner()


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv("RUINSIM_SEED", raising=False)


def write_config(tmp_path, **changes):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload(**changes)))
    return path


class TestVersionAndStatus:

    def test_version(self):
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert f"v{__version__}" in result.stdout

    def test_status_lists_bundled_experiments(self):
        result = runner.invoke(app, ["status"])
        assert result.exit_code == 0
        assert "cor41_ruin.json" in result.stdout


class TestValidate:

    def test_passing_config(self, tmp_path):
        result = runner.invoke(app, ["validate", str(write_config(tmp_path))])
        assert result.exit_code == 0
        assert "All checks passed" in result.stdout

    def test_failed_assumption(self, tmp_path):
        path = write_config(tmp_path, T="inf", truncation={'q1': 3.0, 'q2': 5.0})
        result = runner.invoke(app, ["validate", str(path)])
        assert result.exit_code == VALIDATION_EXIT_CODE
        assert "Validation failed" in result.stdout

    def test_schema_problem(self, tmp_path):
        result = runner.invoke(app, ["validate", str(write_config(tmp_path, r=-1.0))])
        assert result.exit_code == VALIDATION_EXIT_CODE
        assert "Error in experiment config" in result.stdout

    def test_missing_file(self, tmp_path):
        result = runner.invoke(app, ["validate", str(tmp_path / "absent.json")])
        assert result.exit_code == VALIDATION_EXIT_CODE


class TestAsymptotic:

    def test_writes_csv(self, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(app, ["asymptotic", str(write_config(tmp_path)), "--out", str(out)])
        assert result.exit_code == 0
        assert (out / "asymptotic.csv").exists()

    def test_rejected_model(self, tmp_path):
        path = write_config(tmp_path, T="inf", truncation={'q1': 3.0, 'q2': 5.0})
        result = runner.invoke(app, ["asymptotic", str(path)])
        assert result.exit_code == VALIDATION_EXIT_CODE


class TestRun:

    def test_small_run(self, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(app, ["run", str(write_config(tmp_path, estimators=["crude"])), "--out", str(out)])
        assert result.exit_code == 0
        assert "Reports written to" in result.stdout
        for name in ("report.csv", "summary.txt", "meta.json", "asymptotic.csv"):
            assert (out / name).exists()

    def test_rejected_estimator(self, tmp_path):
        claims = payload()['claims']
        claims['dependence'] = {'kind': "ar1", 'rho': 0.5}
        path = write_config(tmp_path, claims=claims, estimators=["conditional"])
        result = runner.invoke(app, ["run", str(path), "--out", str(tmp_path / "out")])
        assert result.exit_code == VALIDATION_EXIT_CODE
        assert not (tmp_path / "out" / "report.csv").exists()
