import math

import numpy as np
import pytest

from exceptions import BoxTooSmallError, DomainError, InvalidArgumentError
from services.saddle_service import SQRT_2_OVER_PI, SaddleService
from utils.rng import SeededRng

C = math.sqrt(2 / math.pi)

# Indicator-active point (alpha, tau_g, beta, gamma, tau_h)
ACTIVE = (0.8, 0.9, 1.1, 3.0, 1.2)


def _bisect_tau(a, beta, tau_g):
    mu = tau_g / beta

    def f(t):
        return a - t / mu - t * math.erf(t / math.sqrt(2)) - C * math.exp(-t * t / 2)

    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _value(saddle, z, cfg):
    alpha, tau_g, beta, gamma, tau_h = z
    return saddle.evaluate_D(alpha, beta, gamma, tau_h, tau_g, cfg)


class TestTauStar:
    @pytest.mark.parametrize("a, beta, tau_g", [(1.0, 1.0, 1.0), (2.0, 1.0, 0.5), (0.9, 3.0, 0.2)])
    def test_matches_bisection(self, a, beta, tau_g):
        tau = SaddleService.tau_star(a, beta, tau_g)
        assert tau == pytest.approx(_bisect_tau(a, beta, tau_g), abs=1e-10)
        assert abs(SaddleService.characteristic(tau, a, beta, tau_g)) <= 1e-12

    def test_increasing_in_a(self):
        assert SaddleService.tau_star(2.0, 1.0, 0.5) > SaddleService.tau_star(1.0, 1.0, 0.5)

    def test_boundary_root_is_zero(self):
        assert SaddleService.tau_star(SQRT_2_OVER_PI, 1.0, 1.0) == 0.0

    def test_below_boundary(self):
        with pytest.raises(DomainError):
            SaddleService.tau_star(0.5, 1.0, 1.0)

    def test_nonpositive_tau_g(self):
        with pytest.raises(InvalidArgumentError):
            SaddleService.tau_star(1.0, 1.0, 0.0)


class TestObjective:
    def test_gradient_matches_finite_differences(self, saddle, trained_cfg):
        z = np.array(ACTIVE)
        grad = saddle.gradient(z[0], z[2], z[3], z[4], z[1], trained_cfg)
        h = 1e-6
        fd = np.empty(5)
        for i in range(5):
            up, down = z.copy(), z.copy()
            up[i] += h
            down[i] -= h
            fd[i] = (_value(saddle, up, trained_cfg) - _value(saddle, down, trained_cfg)) / (2 * h)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-7)

    def test_erf_term_vanishes_when_inactive(self, saddle, trained_cfg):
        alpha, tau_g, beta, _, _ = ACTIVE
        assert saddle.erf_term(alpha, beta, 0.1, tau_g, trained_cfg) == 0.0
        assert saddle.erf_term(alpha, beta, 0.0, tau_g, trained_cfg) == 0.0

    def test_erf_term_is_scaled_g_limit(self, saddle, trained_cfg):
        alpha, tau_g, beta, gamma, _ = ACTIVE
        ratio = saddle.indicator_ratio(alpha, beta, gamma, tau_g, trained_cfg)
        tau = saddle.tau_star(ratio, beta, tau_g)
        omega = math.hypot(alpha, trained_cfg.sigma)
        limit = SaddleService.g_limit(tau_g / beta, omega * tau, gamma, omega, trained_cfg)
        assert saddle.erf_term(alpha, beta, gamma, tau_g, trained_cfg) == pytest.approx(
            trained_cfg.delta * limit, rel=1e-9
        )

    def test_zero_eps_rejected(self, saddle, base_cfg):
        with pytest.raises(DomainError):
            saddle.evaluate_D(1.0, 1.0, 0.0, 1.0, 1.0, base_cfg)

    def test_nonpositive_tau_h(self, saddle, trained_cfg):
        with pytest.raises(InvalidArgumentError):
            saddle.evaluate_D(1.0, 1.0, 0.0, 0.0, 1.0, trained_cfg)


class TestGLimit:
    def test_vectorized_minimum_at_tau_star(self, saddle, trained_cfg):
        alpha, tau_g, beta, gamma, _ = ACTIVE
        omega = math.hypot(alpha, trained_cfg.sigma)
        mu = tau_g / beta
        tau = saddle.tau_star(saddle.indicator_ratio(alpha, beta, gamma, tau_g, trained_cfg), beta, tau_g)
        grid = np.linspace(0.0, 5.0 * omega, 501)
        values = SaddleService.g_limit(mu, grid, gamma, omega, trained_cfg)
        assert values.shape == grid.shape
        assert np.all(values >= SaddleService.g_limit(mu, omega * tau, gamma, omega, trained_cfg) - 1e-12)

    @pytest.mark.parametrize("mu, tau, gamma, omega", [(1.0, 0.8, 0.0, 1.3), (0.7, 1.5, 6.0, 0.9)])
    def test_matches_finite_n_monte_carlo(self, trained_cfg, mu, tau, gamma, omega):
        limit = SaddleService.g_limit(mu, tau, gamma, omega, trained_cfg)
        estimate, _ = SaddleService.g_monte_carlo(mu, tau, gamma, omega, trained_cfg, 100_000, 20, SeededRng(9))
        assert estimate == pytest.approx(limit, rel=0.01)

    def test_soft_threshold(self):
        w = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
        np.testing.assert_array_equal(SaddleService.soft_threshold(w, 1.0), [-1.0, 0.0, 0.0, 0.0, 1.0])

    def test_needs_training_budget(self, base_cfg):
        with pytest.raises(DomainError):
            SaddleService.g_limit(1.0, 0.5, 0.0, 1.0, base_cfg)


class TestClosedForm:
    def test_least_squares_point(self, saddle, base_cfg):
        sol = saddle.solve_saddle(base_cfg)
        assert sol.closed_form
        assert sol.alpha ** 2 == 1.0
        sr, ar = saddle.asymptotic_risks(sol, base_cfg)
        assert sr == 2.0
        norm = math.sqrt(1.0 + 1.0)
        assert ar == pytest.approx(2.0 + 0.25 * norm ** 2 + 2 * C * 0.5 * norm * math.sqrt(2.0))

    def test_underdetermined_rejected(self, saddle, base_cfg):
        with pytest.raises(DomainError):
            saddle.solve_saddle(base_cfg.with_(delta=1.0))

    def test_interpolation_pole(self, saddle, base_cfg):
        cfg = base_cfg.with_(delta=1.02)
        sr, _ = saddle.asymptotic_risks(saddle.solve_saddle(cfg), cfg)
        assert sr == pytest.approx(51.0)

    def test_small_eps_expansion(self, saddle, base_cfg):
        intercept, slope = saddle.sr_small_eps(base_cfg)
        assert intercept == 2.0
        assert slope == pytest.approx(-4 * C)
        with pytest.raises(DomainError):
            saddle.sr_small_eps(base_cfg.with_(delta=0.5))


class TestSolveSaddle:
    def test_generic_branch_near_zero(self, saddle, base_cfg):
        sol = saddle.solve_saddle(base_cfg.with_(eps_train=1e-4))
        assert not sol.closed_form
        assert sol.alpha ** 2 == pytest.approx(1.0, abs=1e-3)

    def test_stationary_local_saddle(self, saddle, trained_cfg):
        sol = saddle.solve_saddle(trained_cfg)
        assert sol.stationarity <= 1e-7
        assert saddle.verify_local_saddle(sol, trained_cfg, 20, SeededRng(1)) <= 1e-8

    def test_warm_start_agrees(self, saddle, trained_cfg):
        cold = saddle.solve_saddle(trained_cfg)
        warm = saddle.solve_saddle(trained_cfg, warm_start=saddle.solve_saddle(trained_cfg.with_(eps_train=0.45)))
        assert warm.alpha == pytest.approx(cold.alpha, rel=1e-6)
        assert warm.beta == pytest.approx(cold.beta, rel=1e-6)

    def test_finite_difference_slope(self, saddle, base_cfg):
        step = base_cfg.with_(eps_train=0.02)
        sr, _ = saddle.asymptotic_risks(saddle.solve_saddle(step), step)
        assert (sr - 2.0) / 0.02 == pytest.approx(-4 * C, rel=0.05)

    def test_overparametrized_with_training_budget(self, saddle, base_cfg):
        cfg = base_cfg.with_(delta=0.5, eps_train=0.2)
        sr, ar = saddle.asymptotic_risks(saddle.solve_saddle(cfg), cfg)
        assert math.isfinite(sr) and sr >= cfg.sigma ** 2
        assert ar >= sr

    def test_noiseless_rejected(self, saddle, trained_cfg):
        with pytest.raises(DomainError):
            saddle.solve_saddle(trained_cfg.with_(sigma=0.0))

    def test_convex_concave_near_saddle(self, saddle, trained_cfg):
        center = saddle.solve_saddle(trained_cfg).as_vector()
        rng = SeededRng(8)
        for block, sign in (([0, 1], 1.0), ([2, 3, 4], -1.0)):
            for _ in range(100):
                ends = []
                for _ in range(2):
                    z = center.copy()
                    z[block] *= 1.0 + 0.1 * rng.uniform(-1.0, 1.0, len(block))
                    ends.append(z)
                mid = 0.5 * (ends[0] + ends[1])
                chord = 0.5 * (_value(saddle, ends[0], trained_cfg) + _value(saddle, ends[1], trained_cfg))
                assert sign * (chord - _value(saddle, mid, trained_cfg)) >= -1e-10


GRID = [
    (0.333, 0.1), (0.333, 0.4), (0.333, 1.0),
    (0.5, 0.05), (0.5, 0.2), (0.5, 0.3), (0.5, 0.8),
    (2.0, 0.05), (2.0, 0.45), (2.0, 1.0),
    (5.0, 0.1), (5.0, 0.5), (5.0, 0.9),
    (10.0, 0.02), (10.0, 0.3), (10.0, 0.8),
    (100.0, 0.05), (100.0, 0.389), (100.0, 0.8),
]


class TestSolverGrid:
    @pytest.mark.parametrize("delta, eps", GRID)
    def test_certified_interior_saddle(self, saddle, base_cfg, delta, eps):
        cfg = base_cfg.with_(delta=delta, eps_train=eps)
        sol = saddle.solve_saddle(cfg)
        k_alpha, k_beta = SaddleService.box_bounds(cfg)
        assert not sol.closed_form
        assert sol.stationarity <= saddle.stationarity_tol
        assert 0.0 < sol.alpha < k_alpha and 0.0 < sol.beta < k_beta
        assert sol.tau_g > 0 and sol.tau_star > 0
        sr, ar = saddle.asymptotic_risks(sol, cfg)
        assert math.isfinite(ar) and cfg.sigma ** 2 <= sr <= ar

    @pytest.mark.parametrize("delta, eps", [(0.5, 0.2), (2.0, 0.45), (100.0, 0.389)])
    def test_reduced_residuals_vanish(self, saddle, base_cfg, delta, eps):
        cfg = base_cfg.with_(delta=delta, eps_train=eps)
        sol = saddle.solve_saddle(cfg)
        omega = math.hypot(sol.alpha, cfg.sigma)
        nu = SaddleService.estimator_norm(sol, cfg) / omega
        r_mu, r_omega, _ = SaddleService._reduced_system(nu, sol.tau_g / sol.beta, cfg)
        assert abs(float(r_mu)) <= 1e-8 and abs(float(r_omega)) <= 1e-8

    def test_warm_start_across_delta(self, saddle, base_cfg):
        cfg = base_cfg.with_(delta=0.5, eps_train=0.2)
        cold = saddle.solve_saddle(cfg)
        warm = saddle.solve_saddle(cfg, warm_start=saddle.solve_saddle(cfg.with_(delta=2.0)))
        assert warm.alpha == pytest.approx(cold.alpha, rel=1e-6)
        assert warm.tau_g == pytest.approx(cold.tau_g, rel=1e-6)

    def test_box_enlargement_keeps_solution(self, saddle, trained_cfg, monkeypatch):
        reference = saddle.solve_saddle(trained_cfg)
        monkeypatch.setattr(SaddleService, "box_bounds", staticmethod(lambda cfg: (0.01, 0.01)))
        enlarged = SaddleService(box_retries=12).solve_saddle(trained_cfg)
        assert enlarged.alpha == reference.alpha
        assert enlarged.beta == reference.beta

    def test_box_still_binding(self, trained_cfg, monkeypatch):
        monkeypatch.setattr(SaddleService, "box_bounds", staticmethod(lambda cfg: (0.01, 0.01)))
        with pytest.raises(BoxTooSmallError) as info:
            SaddleService(box_retries=2).solve_saddle(trained_cfg)
        assert info.value.context["eps"] == 0.5

    @pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
    def test_large_delta_matches_pareto_frontier(self, saddle, pareto, base_cfg, lam):
        frontier = pareto.pareto_fixed_point(lam, base_cfg)
        cfg = base_cfg.with_(delta=100.0, eps_train=pareto.lambda_to_epsilon(lam, base_cfg))
        sr, ar = saddle.asymptotic_risks(saddle.solve_saddle(cfg), cfg)
        assert sr == pytest.approx(frontier.sr, rel=0.02)
        assert ar == pytest.approx(frontier.ar, rel=0.02)


class TestZeroEstimator:
    def test_threshold(self, base_cfg):
        assert SaddleService.zero_estimator_threshold(base_cfg) == pytest.approx(1.0 / C)
        assert SaddleService.zero_estimator_threshold(base_cfg.with_(delta=1e12)) == pytest.approx(
            1.0 / (C * math.sqrt(2.0))
        )

    @pytest.mark.parametrize("delta", [0.5, 2.0, 20.0])
    def test_above_threshold(self, saddle, base_cfg, delta):
        cfg = base_cfg.with_(delta=delta)
        cfg = cfg.with_(eps_train=1.1 * SaddleService.zero_estimator_threshold(cfg))
        sol = saddle.solve_saddle(cfg)
        assert sol.closed_form and sol.tau_g == 0.0
        assert SaddleService.estimator_norm(sol, cfg) == 0.0
        assert saddle.asymptotic_risks(sol, cfg) == (2.0, 2.0)

    def test_continuous_at_threshold(self, saddle, trained_cfg):
        cfg = trained_cfg.with_(eps_train=(1.0 - 1e-3) * SaddleService.zero_estimator_threshold(trained_cfg))
        sol = saddle.solve_saddle(cfg)
        assert not sol.closed_form
        assert SaddleService.estimator_norm(sol, cfg) < 0.1
        sr, _ = saddle.asymptotic_risks(sol, cfg)
        assert sr == pytest.approx(2.0, abs=0.1)
        boundary = SaddleService.zero_estimator_solution(cfg)
        assert sol.d_value == pytest.approx(boundary.d_value, rel=0.05)


class TestEstimatorNorm:
    def test_least_squares_limit(self, saddle, base_cfg):
        sol = saddle.solve_saddle(base_cfg.with_(delta=3.0))
        assert SaddleService.estimator_norm(sol, base_cfg.with_(delta=3.0)) == pytest.approx(math.sqrt(1.5))

    def test_trained_norm_positive(self, saddle, trained_cfg):
        sol = saddle.solve_saddle(trained_cfg)
        assert 0.0 < SaddleService.estimator_norm(sol, trained_cfg) < math.sqrt(2.0)
