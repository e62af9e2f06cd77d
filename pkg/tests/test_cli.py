"""End-to-end tests of the esmcheck command line."""

import copy
import json
import os

import pytest
import yaml

from core.builders import bundled_path, load_bundled
from esmcheck import main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    config = {
        "general": {"log_level": "WARNING", "default_kappa": 1.0},
        "logging": {"log_file": str(tmp_path / "logs" / "esmcheck.log"), "console": False},
    }
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return str(path)


@pytest.fixture
def run(config_file, tmp_path):
    """Run the CLI and return (exit code, parsed report)."""

    def runner(command, scenario=None, *extra, report_name="report.json"):
        report = tmp_path / report_name
        argv = [command, "--config", config_file, "--report", str(report), *extra]
        if scenario is not None:
            argv += ["--scenario", scenario]
        code = main(argv)
        data = json.loads(report.read_text(encoding="utf-8")) if report.exists() else None
        return code, data

    return runner


def write_scenario(tmp_path, data, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


class TestExitCodes:
    def test_vacuum_validates(self, run):
        code, report = run("validate", str(bundled_path("vacuum")))
        assert code == 0
        assert report["status"] == "pass"
        assert report["command"] == "validate"
        assert report["scenario_hash"] == load_bundled("vacuum").scenario_hash
        assert report["conventions"]["signature"] == "(-,+,+,+)"
        assert report["results"]["checks"]["taming"]["samples"] == 8

    def test_vacuum_residuals_vanish(self, run):
        code, report = run("residuals", str(bundled_path("vacuum")))
        assert code == 0
        for equation in ("einstein", "scalar", "em"):
            assert report["results"]["norms"][equation]["max"] == 0.0

    def test_identity_is_rejected_as_taming(self, run, tmp_path):
        data = copy.deepcopy(load_bundled("vacuum").data)
        data["target"]["taming"] = {"constant": [[1, 0], [0, 1]]}
        code, report = run("validate", write_scenario(tmp_path, data))
        assert code == 1
        assert report["status"] == "fail"
        assert report["results"]["checks"]["taming"]["error"] == "NotAlmostComplex"
        assert report["results"]["checks"]["twisted_periodicity"]["status"] == "skipped"

    def test_half_period_flux_fails_quantization(self, run):
        code, report = run("quantize", str(bundled_path("half_period")))
        assert code == 1
        assert report["results"]["quantization"]["verdict"] == "NonIntegral"
        assert report["results"]["quantization"]["residual"] == pytest.approx(0.5)

    def test_missing_scenario_file(self, run, tmp_path):
        code, report = run("validate", str(tmp_path / "missing.yaml"))
        assert code == 2
        assert report is None

    def test_scenario_required(self, run):
        assert run("residuals")[0] == 2

    def test_malformed_yaml(self, run, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("target: [unclosed\n", encoding="utf-8")
        assert run("validate", str(path))[0] == 2

    def test_bad_options(self, run):
        vacuum = str(bundled_path("vacuum"))
        assert run("validate", vacuum, "--tol", "field_tol")[0] == 2
        assert run("validate", vacuum, "--tol", "made_up=1e-3")[0] == 2
        assert run("validate", vacuum, "--tol", "field_tol=-1")[0] == 2
        assert run("residuals", vacuum, "--refine", "0")[0] == 2
        assert main(["no-such-command"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "none.yaml"),
                     "--scenario", str(bundled_path("vacuum"))]) == 2

    def test_tolerance_override_reaches_the_check(self, run, tmp_path):
        data = copy.deepcopy(load_bundled("vacuum").data)
        data["phi"] = {"constant": ["1e-6"]}
        scenario = write_scenario(tmp_path, data)
        assert run("residuals", scenario)[0] == 1
        code, report = run("residuals", scenario, "--tol", "field_tol=1e-3", report_name="loose.json")
        assert code == 0
        assert report["results"]["norms"]["scalar"]["max"] == pytest.approx(1e-6)


class TestReports:
    def test_reports_are_byte_identical(self, run, tmp_path):
        scenario = str(bundled_path("plane_wave"))
        run("residuals", scenario, report_name="first.json")
        run("residuals", scenario, report_name="second.json")
        first = (tmp_path / "first.json").read_bytes()
        assert first == (tmp_path / "second.json").read_bytes()
        assert first.endswith(b"\n")

    def test_timings_are_optional(self, run):
        vacuum = str(bundled_path("vacuum"))
        assert "timings" not in run("validate", vacuum)[1]
        assert "timings" in run("validate", vacuum, "--timings", report_name="timed.json")[1]

    def test_stdout_report(self, config_file, capsys):
        assert main(["holonomy", "--config", config_file, "--scenario", str(bundled_path("ufold"))]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["results"]["triviality"]["verdict"] == "Nontrivial"
        assert report["results"]["holonomy"]["commutant_dimension"] == 2

    def test_log_file_is_written(self, run, tmp_path):
        run("validate", str(bundled_path("vacuum")))
        assert os.path.exists(tmp_path / "logs" / "esmcheck.log")


class TestCommands:
    def test_plane_wave_residuals_with_refinement(self, run):
        code, report = run("residuals", str(bundled_path("plane_wave")), "--refine", "2")
        assert code == 0
        assert report["results"]["checked"] == ["scalar", "em", "polarization"]
        assert "convergence" in report["results"]

    def test_seeded_duality_is_reproducible(self, run, tmp_path):
        scenario = str(bundled_path("ufold"))
        code, first = run("duality", scenario, "--seed", "11", "--random-count", "3", report_name="a.json")
        assert code == 0
        _, second = run("duality", scenario, "--seed", "11", "--random-count", "3", report_name="b.json")
        assert first == second

    def test_duality_needs_transformations(self, run, tmp_path):
        data = copy.deepcopy(load_bundled("vacuum").data)
        del data["transformation"]
        assert run("duality", write_scenario(tmp_path, data))[0] == 2

    def test_quantize_integer_cohomology_with_parabolic_monodromy(self, run):
        code, report = run("quantize", str(bundled_path("ufold")))
        assert code == 0
        results = report["results"]
        assert results["cells"] == [1, 3, 3, 1]
        assert [results["cohomology"][str(k)]["rank"] for k in range(4)] == [1, 3, 3, 1]
        integer = results["integer_cohomology"]
        assert integer["status"] == "pass"
        assert [integer["groups"][str(k)]["rank"] for k in range(4)] == [1, 3, 3, 1]
        assert all(integer["groups"][str(k)]["torsion"] == [] for k in range(4))
        assert results["quantization"]["verdict"] == "Integral"

    def test_ufold_demo(self, run):
        code, report = run("ufold-demo")
        assert code == 0
        results = report["results"]
        assert results["triviality"]["verdict"] == "Nontrivial"
        assert results["triviality"]["identity_monodromy_verdict"] == "Trivial"
        for sub in ("validate", "residuals", "duality", "quantize"):
            assert results[sub]["status"] == "pass"
        assert results["residuals"]["results"]["checked"] == ["scalar", "em", "polarization"]
        assert set(results["residuals"]["results"]["status"]) == {"einstein", "scalar", "em", "polarization"}
        assert results["integral_dualities"]["members"]
