import math

import pytest

from exceptions import ConvergenceError, InvalidArgumentError
from services import saddle_service
from services.validation_service import ValidationService

FAST = [
    "eps0_closed_form",
    "tau_star_residual",
    "pareto_fixed_point",
    "infinite_data_optimality",
    "small_eps_expansion",
    "convex_concave_structure",
]


@pytest.fixture
def suite():
    return ValidationService("quick", workers=1)


class TestSuite:
    def test_unknown_budget(self):
        with pytest.raises(InvalidArgumentError):
            ValidationService("thorough")

    def test_quick_scaling(self, suite):
        assert suite._count(50) == 10
        assert suite._tol(0.05) == pytest.approx(0.1)
        full = ValidationService("full")
        assert full._count(50) == 50
        assert full._tol(0.05) == 0.05

    def test_criteria_names(self, suite):
        names = [name for name, _ in suite.criteria()]
        assert len(names) == 10
        assert names[1] == "tau_star_residual"

    @pytest.mark.parametrize("name", FAST)
    def test_deterministic_criteria_pass(self, suite, name):
        report = suite.run_suite([name])
        assert report.passed, report.results[0].detail

    def test_exceptions_become_failures(self, suite, monkeypatch):
        def broken():
            raise ConvergenceError("stalled", residual=1.0)

        monkeypatch.setattr(suite, "check_eps0_closed_form", broken)
        report = suite.run_suite(["eps0_closed_form"])
        assert report.failed_names() == ["eps0_closed_form"]
        assert math.isnan(report.results[0].measured)
        assert "stalled" in report.results[0].detail

    def test_tampered_constant_is_caught(self, suite, monkeypatch):
        monkeypatch.setattr(saddle_service, "SQRT_2_OVER_PI", -saddle_service.SQRT_2_OVER_PI)
        report = suite.run_suite(["tau_star_residual"])
        assert not report.passed
        assert report.failed_names() == ["tau_star_residual"]


@pytest.mark.slow
class TestMonteCarloCriteria:
    @pytest.mark.parametrize("name", ["g_limit_oracle", "finite_sample_risk_oracles", "figure_qualitative"])
    def test_quick_budget(self, suite, name):
        report = suite.run_suite([name])
        assert report.passed, report.results[0].detail

    def test_theory_simulation_match(self):
        report = ValidationService("full", workers=4).run_suite(["theory_simulation_match"])
        assert report.passed, report.results[0].detail
