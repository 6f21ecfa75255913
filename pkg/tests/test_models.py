import math

import pytest

from exceptions import InvalidArgumentError
from models import (
    AsymptoticConfig,
    CriterionResult,
    KnobKind,
    RiskPoint,
    RiskSource,
    SweepRow,
    SweepTable,
    ValidationReport,
)


def _table(rows):
    cfg = AsymptoticConfig(delta=2.0, sigma=1.0, v_norm=1.0)
    return SweepTable("1.0", cfg, "eps", rows, {"master_seed": None})


class TestAsymptoticConfig:
    def test_casts_to_float(self):
        cfg = AsymptoticConfig(delta=2, sigma=1, v_norm=1)
        assert isinstance(cfg.delta, float)
        assert cfg.eps_train == 0.0

    @pytest.mark.parametrize("field", ["sigma", "v_norm", "eps_train", "eps_test"])
    def test_rejects_negative(self, field):
        kwargs = dict(delta=1.0, sigma=1.0, v_norm=1.0)
        kwargs[field] = -0.1
        with pytest.raises(InvalidArgumentError):
            AsymptoticConfig(**kwargs)

    @pytest.mark.parametrize("delta", [0.0, -1.0, math.nan, math.inf])
    def test_rejects_bad_delta(self, delta):
        with pytest.raises(InvalidArgumentError):
            AsymptoticConfig(delta=delta, sigma=1.0, v_norm=1.0)

    @pytest.mark.parametrize("field", ["delta", "sigma", "v_norm", "eps_train", "eps_test"])
    def test_rejects_bool(self, field):
        kwargs = dict(delta=2.0, sigma=1.0, v_norm=1.0)
        kwargs[field] = True
        with pytest.raises(InvalidArgumentError):
            AsymptoticConfig(**kwargs)

    def test_rejects_strings(self):
        with pytest.raises(InvalidArgumentError):
            AsymptoticConfig(delta="2", sigma=1.0, v_norm=1.0)

    def test_prediction_region(self):
        assert AsymptoticConfig(delta=2.0, sigma=1.0, v_norm=1.0).has_asymptotic_prediction
        assert not AsymptoticConfig(delta=1.0, sigma=1.0, v_norm=1.0).has_asymptotic_prediction
        assert AsymptoticConfig(delta=0.5, sigma=1.0, v_norm=1.0, eps_train=0.1).has_asymptotic_prediction

    def test_dict_round_trip(self):
        cfg = AsymptoticConfig(delta=0.5, sigma=0.3, v_norm=2.0, eps_train=0.1, eps_test=0.2)
        assert AsymptoticConfig.from_dict(cfg.to_dict()) == cfg

    def test_with_validates(self):
        cfg = AsymptoticConfig(delta=2.0, sigma=1.0, v_norm=1.0)
        assert cfg.with_(eps_train=0.3).eps_train == 0.3
        with pytest.raises(InvalidArgumentError):
            cfg.with_(delta=0.0)


class TestRiskPoint:
    def test_dominance_is_strict_somewhere(self):
        a = RiskPoint(1.0, 2.0, RiskSource.PARETO_THEORY, 0.1, KnobKind.LAMBDA)
        b = RiskPoint(1.0, 3.0, RiskSource.PARETO_THEORY, 0.2, KnobKind.LAMBDA)
        assert a.dominates(b)
        assert not b.dominates(a)
        assert not a.dominates(a)

    def test_tradeoff_points_do_not_dominate(self):
        a = RiskPoint(1.0, 3.0, RiskSource.EMPIRICAL, 0.1, KnobKind.EPSILON)
        b = RiskPoint(2.0, 2.0, RiskSource.EMPIRICAL, 0.2, KnobKind.EPSILON)
        assert not a.dominates(b) and not b.dominates(a)


class TestSweepTable:
    def test_rows_sorted_by_axis(self):
        table = _table([SweepRow(0.3, 1.0, 2.0), SweepRow(0.1, 1.5, 1.8)])
        assert list(table.axis()) == [0.1, 0.3]
        assert list(table.column("sr_theory")) == [1.5, 1.0]

    def test_duplicate_axis_rejected(self):
        with pytest.raises(InvalidArgumentError):
            _table([SweepRow(0.1, 1.0, 2.0), SweepRow(0.1, 1.0, 2.0)])

    def test_mixed_empirical_rejected(self):
        with pytest.raises(InvalidArgumentError):
            _table([SweepRow(0.1, 1.0, 2.0), SweepRow(0.2, 1.0, 2.0, 1.1, 2.1, 5, 0.1, 0.1)])

    def test_columns_follow_empirical_flag(self):
        assert _table([SweepRow(0.1, 1.0, 2.0)]).columns == ("axis_value", "sr_theory", "ar_theory")
        full = _table([SweepRow(0.1, 1.0, 2.0, 1.1, 2.1, 5, 0.1, 0.1)])
        assert full.has_empirical
        assert full.columns[-1] == "stderr_ar"


class TestValidationReport:
    def test_failed_names(self):
        report = ValidationReport(
            "quick",
            [CriterionResult("a", 0.0, 1.0, True), CriterionResult("b", 2.0, 1.0, False, "too big")],
        )
        assert not report.passed
        assert report.failed_names() == ["b"]
        assert report.to_dict()["criteria"][1]["detail"] == "too big"
