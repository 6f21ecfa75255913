import math

import numpy as np
import pytest

from exceptions import InvalidArgumentError
from services.risk_service import RiskService
from utils.rng import SeededRng


def _test_draws(theta0, sigma0, samples, rng):
    x = rng.standard_normal((samples, len(theta0)))
    y = x @ theta0 + sigma0 * rng.standard_normal(samples)
    return x, y


class TestStandardRisk:
    def test_perfect_estimate_leaves_noise(self):
        theta = np.array([1.0, -2.0, 0.5])
        assert RiskService.standard_risk(theta, theta, 2.0, 4) == pytest.approx(1.0)

    def test_formula(self):
        theta_hat = np.array([1.0, 0.0])
        theta0 = np.array([0.0, 1.0])
        assert RiskService.standard_risk(theta_hat, theta0, 1.0, 2) == pytest.approx(1.5)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            RiskService.standard_risk(np.zeros(3), np.zeros(4), 1.0, 3)

    def test_matches_monte_carlo(self):
        rng = SeededRng(101)
        p = 8
        theta_hat, theta0 = rng.standard_normal(p), rng.standard_normal(p)
        x, y = _test_draws(theta0, 1.0, 1_000_000, rng)
        losses = (y - x @ theta_hat) ** 2 / p
        stderr = losses.std(ddof=1) / math.sqrt(losses.size)
        exact = RiskService.standard_risk(theta_hat, theta0, 1.0, p)
        assert abs(losses.mean() - exact) <= 3 * stderr


class TestAdversarialRisk:
    def test_zero_budget_is_standard_risk(self):
        rng = SeededRng(3)
        theta_hat, theta0 = rng.standard_normal(5), rng.standard_normal(5)
        assert RiskService.adversarial_risk(theta_hat, theta0, 0.7, 5, 0.0) == RiskService.standard_risk(
            theta_hat, theta0, 0.7, 5
        )

    def test_dominates_standard_risk(self):
        rng = SeededRng(4)
        theta_hat, theta0 = rng.standard_normal(5), rng.standard_normal(5)
        assert RiskService.adversarial_risk(theta_hat, theta0, 1.0, 5, 0.3) > RiskService.standard_risk(
            theta_hat, theta0, 1.0, 5
        )

    def test_zero_estimate_has_no_penalty(self):
        theta0 = np.ones(4)
        assert RiskService.adversarial_risk(np.zeros(4), theta0, 1.0, 4, 0.9) == pytest.approx(1.25)

    def test_negative_budget(self):
        with pytest.raises(InvalidArgumentError):
            RiskService.adversarial_risk(np.zeros(2), np.zeros(2), 1.0, 2, -0.1)

    def test_matches_monte_carlo(self):
        rng = SeededRng(202)
        p, eps_test = 8, 0.5
        theta_hat, theta0 = rng.standard_normal(p), rng.standard_normal(p)
        x, y = _test_draws(theta0, 1.0, 1_000_000, rng)
        losses = (np.abs(y - x @ theta_hat) + eps_test * np.linalg.norm(theta_hat)) ** 2 / p
        stderr = losses.std(ddof=1) / math.sqrt(losses.size)
        exact = RiskService.adversarial_risk(theta_hat, theta0, 1.0, p, eps_test)
        assert abs(losses.mean() - exact) <= 3 * stderr


class TestWorstCasePerturbation:
    def test_reaches_closed_form_inner_maximum(self):
        rng = SeededRng(5)
        x, theta = rng.standard_normal(4), rng.standard_normal(4)
        y, eps = 0.3, 0.25
        delta = RiskService.worst_case_perturbation(x, y, theta, eps)
        assert np.linalg.norm(delta) == pytest.approx(eps)
        expected = (abs(y - x @ theta) + eps * np.linalg.norm(theta)) ** 2
        assert (y - (x + delta) @ theta) ** 2 == pytest.approx(expected, rel=1e-12)

    def test_beats_sampled_perturbations(self):
        rng = SeededRng(6)
        x, theta = rng.standard_normal(4), rng.standard_normal(4)
        y, eps = -1.2, 0.5
        best = (y - (x + RiskService.worst_case_perturbation(x, y, theta, eps)) @ theta) ** 2
        samples = rng.unit_ball(10_000, 4, eps)
        sampled = (y - (x + samples) @ theta) ** 2
        assert np.all(sampled <= best + 1e-12)

    def test_zero_theta_gives_zero(self):
        delta = RiskService.worst_case_perturbation(np.ones(3), 1.0, np.zeros(3), 0.5)
        assert np.array_equal(delta, np.zeros(3))

    def test_zero_residual_gives_zero(self):
        x = np.array([1.0, 0.0])
        theta = np.array([2.0, 0.0])
        assert np.array_equal(RiskService.worst_case_perturbation(x, 2.0, theta, 0.5), np.zeros(2))


class TestRiskProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_quadratic_homogeneity(self, seed):
        rng = SeededRng(300 + seed)
        p = 6
        theta_hat, theta0 = rng.standard_normal(p), rng.standard_normal(p)
        sigma0 = float(rng.uniform(0.1, 3.0, None))
        eps_test = float(rng.uniform(0.0, 2.0, None))
        c = float(rng.uniform(0.1, 10.0, None))
        sr = RiskService.standard_risk(theta_hat, theta0, sigma0, p)
        ar = RiskService.adversarial_risk(theta_hat, theta0, sigma0, p, eps_test)
        scaled = RiskService.standard_risk(c * theta_hat, c * theta0, c * sigma0, p)
        assert scaled == pytest.approx(c ** 2 * sr, rel=1e-12)
        assert RiskService.adversarial_risk(c * theta_hat, c * theta0, c * sigma0, p, eps_test) == pytest.approx(
            c ** 2 * ar, rel=1e-12
        )

    @pytest.mark.parametrize("seed", range(10))
    def test_nondecreasing_in_test_budget(self, seed):
        rng = SeededRng(400 + seed)
        p = 5
        theta_hat, theta0 = rng.standard_normal(p), rng.standard_normal(p)
        sigma0 = float(rng.uniform(0.1, 3.0, None))
        budgets = np.sort(rng.uniform(0.0, 3.0, 50))
        risks = [RiskService.adversarial_risk(theta_hat, theta0, sigma0, p, float(e)) for e in budgets]
        assert np.all(np.diff(risks) >= 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_equals_standard_risk_only_without_attack(self, seed):
        rng = SeededRng(500 + seed)
        p = 4
        theta_hat, theta0 = rng.standard_normal(p), rng.standard_normal(p)
        sigma0 = float(rng.uniform(0.1, 3.0, None))
        eps_test = float(rng.uniform(0.05, 2.0, None))
        sr = RiskService.standard_risk(theta_hat, theta0, sigma0, p)
        assert RiskService.adversarial_risk(theta_hat, theta0, sigma0, p, eps_test) > sr
        assert RiskService.adversarial_risk(theta_hat, theta0, sigma0, p, 0.0) == sr
        zero = np.zeros(p)
        assert RiskService.adversarial_risk(zero, theta0, sigma0, p, eps_test) == pytest.approx(
            RiskService.standard_risk(zero, theta0, sigma0, p), rel=1e-15
        )
