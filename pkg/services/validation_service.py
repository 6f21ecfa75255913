"""Acceptance suite behind the `validate` command."""
import math
from typing import Callable, List, Tuple

import numpy as np

from config import config
from exceptions import InvalidArgumentError
from logger import setup_logger
from models import AsymptoticConfig, CriterionResult, ValidationReport
from services.pareto_service import ParetoService
from services.risk_service import RiskService
from services.saddle_service import SaddleService
from services.simulation_service import SimulationService
from services.sweep_service import SweepService
from utils.metrics import PerformanceMonitor, ReplicateStats
from utils.rng import SeededRng

logger = setup_logger(__name__)

# Must not be imported from saddle_service
_C = math.sqrt(2.0 / math.pi)

BUDGETS = ("full", "quick")


def _own_characteristic(tau: float, a: float, mu: float) -> float:
    return a - tau / mu - tau * math.erf(tau / math.sqrt(2.0)) - _C * math.exp(-0.5 * tau * tau)


def _bisection_root(a: float, mu: float) -> float:
    hi = 1.0
    while _own_characteristic(hi, a, mu) >= 0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _own_characteristic(mid, a, mu) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return 0.5 * (lo + hi)


class ValidationService:
    """Runs the named acceptance criteria and collects their verdicts."""

    def __init__(self, budget: str = "full", workers: int = None, seed: int = None):
        """
        Initialize the suite.

        Args:
            budget: "full" or "quick"; quick divides seed counts by 5 and doubles tolerances
            workers: Process count for the Monte Carlo criterion
            seed: Master seed for every random draw in the suite

        Raises:
            InvalidArgumentError: On an unknown budget
        """
        if budget not in BUDGETS:
            raise InvalidArgumentError(f"budget must be one of {BUDGETS}, got {budget!r}")
        self.budget = budget
        self.workers = config.MAX_WORKERS if workers is None else workers
        self.seed = config.DEFAULT_SEED if seed is None else seed
        self.saddle = SaddleService()
        self.pareto = ParetoService()
        self.base = AsymptoticConfig(delta=2.0, sigma=1.0, v_norm=1.0, eps_train=0.0, eps_test=0.5)

    @property
    def quick(self) -> bool:
        return self.budget == "quick"

    def _tol(self, value: float) -> float:
        return 2.0 * value if self.quick else value

    def _count(self, value: int) -> int:
        return max(1, value // 5) if self.quick else value

    def criteria(self) -> List[Tuple[str, Callable[[], CriterionResult]]]:
        return [
            ("eps0_closed_form", self.check_eps0_closed_form),
            ("tau_star_residual", self.check_tau_star_residual),
            ("theory_simulation_match", self.check_theory_simulation_match),
            ("pareto_fixed_point", self.check_pareto_fixed_point),
            ("infinite_data_optimality", self.check_infinite_data_optimality),
            ("small_eps_expansion", self.check_small_eps_expansion),
            ("g_limit_oracle", self.check_g_limit_oracle),
            ("convex_concave_structure", self.check_convex_concave_structure),
            ("figure_qualitative", self.check_figure_qualitative),
            ("finite_sample_risk_oracles", self.check_finite_sample_risk_oracles),
        ]

    @PerformanceMonitor.time_function
    def run_suite(self, only: List[str] = None) -> ValidationReport:
        """
        Run every criterion, recording failures instead of stopping at the first.

        Args:
            only: Optional subset of criterion names

        Returns:
            ValidationReport in criterion order
        """
        report = ValidationReport(budget=self.budget)
        for name, check in self.criteria():
            if only is not None and name not in only:
                continue
            logger.info(f"Checking {name} ({self.budget} budget)")
            try:
                result = check()
            except Exception as e:
                logger.error(f"Criterion {name} raised: {e}")
                result = CriterionResult(name, math.nan, math.nan, False, f"{type(e).__name__}: {e}")
            verdict = "PASS" if result.passed else "FAIL"
            logger.info(f"{name}: {verdict} (measured {result.measured:.3e}, tolerance {result.tolerance:.3e})")
            report.results.append(result)
        return report

    # ------------------------------------------------------------------
    # Criteria
    # ------------------------------------------------------------------

    def check_eps0_closed_form(self) -> CriterionResult:
        cfg = self.base
        sol = self.saddle.solve_saddle(cfg)
        sr, _ = self.saddle.asymptotic_risks(sol, cfg)
        exact = sol.alpha ** 2 == 1.0 and sr == 2.0

        generic = self.saddle.solve_saddle(cfg.with_(eps_train=1e-4))
        gap = abs(generic.alpha ** 2 - sol.alpha ** 2)
        tol = self._tol(1e-3)
        return CriterionResult(
            "eps0_closed_form", gap, tol, exact and gap <= tol,
            f"alpha^2={sol.alpha ** 2!r}, sr={sr!r}, alpha^2 at eps=1e-4 is {generic.alpha ** 2:.10g}",
        )

    def check_tau_star_residual(self) -> CriterionResult:
        worst_residual, worst_gap = 0.0, 0.0
        for a in np.linspace(_C, _C + 3.0, 10):
            for beta in np.geomspace(0.1, 10.0, 10):
                for tau_g in np.geomspace(0.1, 10.0, 10):
                    tau = self.saddle.tau_star(float(a), float(beta), float(tau_g))
                    mu = tau_g / beta
                    worst_residual = max(worst_residual, abs(_own_characteristic(tau, a, mu)))
                    worst_gap = max(worst_gap, abs(tau - _bisection_root(a, mu)))
        tol = self._tol(1e-12)
        return CriterionResult(
            "tau_star_residual", worst_residual, tol,
            worst_residual <= tol and worst_gap <= self._tol(1e-10),
            f"max bisection gap {worst_gap:.3e}",
        )

    def check_theory_simulation_match(self) -> CriterionResult:
        cfg = self.base.with_(eps_train=0.5)
        sol = self.saddle.solve_saddle(cfg)
        sr_theory, ar_theory = self.saddle.asymptotic_risks(sol, cfg)

        p = 500
        n = int(round(cfg.delta * p))
        summary = SimulationService().run_replicates(
            n, p, cfg, cfg.eps_train, self._count(config.DEFAULT_SEEDS), self.seed, self.workers
        )
        gaps = {
            "error": ReplicateStats.relative_gap(float(np.mean(summary.error_sq)), sol.alpha ** 2),
            "sr": ReplicateStats.relative_gap(float(np.mean(summary.sr)), sr_theory),
            "ar": ReplicateStats.relative_gap(float(np.mean(summary.ar)), ar_theory),
        }
        worst = max(gaps.values())
        tol = self._tol(0.05)
        detail = ", ".join(f"{k} gap {v:.3%}" for k, v in gaps.items())
        return CriterionResult("theory_simulation_match", worst, tol, worst <= tol, detail)

    def check_pareto_fixed_point(self) -> CriterionResult:
        cfg = self.base
        lambdas = np.geomspace(1e-3, 1e3, 40)
        residual = max(self.pareto.pareto_fixed_point(float(lam), cfg).residual for lam in lambdas)
        points = self.pareto.pareto_curve([float(lam) for lam in lambdas], cfg)
        dominated = ParetoService.is_non_dominated(points).count(False)
        tol = self._tol(1e-12)
        return CriterionResult(
            "pareto_fixed_point", residual, tol, residual <= tol and dominated == 0,
            f"{dominated} dominated points",
        )

    def check_infinite_data_optimality(self) -> CriterionResult:
        cfg = self.base
        worst_gap, worst_plug = 0.0, 0.0
        for lam in (0.1, 1.0, 10.0):
            frontier = self.pareto.pareto_fixed_point(lam, cfg)
            eps = self.pareto.lambda_to_epsilon(lam, cfg)
            gamma_eps, _ = ParetoService.infinite_data_fixed_point(eps, cfg)
            worst_plug = max(worst_plug, abs(gamma_eps - frontier.gamma0))

            point_cfg = cfg.with_(delta=100.0, eps_train=eps)
            sr, ar = self.saddle.asymptotic_risks(self.saddle.solve_saddle(point_cfg), point_cfg)
            worst_gap = max(
                worst_gap,
                ReplicateStats.relative_gap(sr, frontier.sr),
                ReplicateStats.relative_gap(ar, frontier.ar),
            )
        tol = self._tol(0.02)
        return CriterionResult(
            "infinite_data_optimality", worst_gap, tol,
            worst_gap <= tol and worst_plug <= self._tol(1e-8),
            f"plug-back residual {worst_plug:.3e}",
        )

    def check_small_eps_expansion(self) -> CriterionResult:
        cfg = self.base
        intercept, slope = self.saddle.sr_small_eps(cfg)
        sr0, _ = self.saddle.asymptotic_risks(self.saddle.solve_saddle(cfg), cfg)
        step_cfg = cfg.with_(eps_train=0.02)
        sr1, _ = self.saddle.asymptotic_risks(self.saddle.solve_saddle(step_cfg), step_cfg)
        fd_slope = (sr1 - sr0) / 0.02

        reference = -4.0 * _C
        gap = max(
            ReplicateStats.relative_gap(fd_slope, reference),
            ReplicateStats.relative_gap(slope, reference),
        )
        tol = self._tol(0.05)
        return CriterionResult(
            "small_eps_expansion", gap, tol, gap <= tol and sr0 == 2.0 and intercept == 2.0,
            f"finite-difference slope {fd_slope:.6g}, closed-form slope {slope:.6g}, intercept {sr0!r}",
        )

    def check_g_limit_oracle(self) -> CriterionResult:
        cfg = self.base.with_(eps_train=0.5)
        rng = SeededRng(self.seed).spawn(7)
        draws = self._count(20)
        worst = 0.0
        for k in range(20):
            mu = float(rng.uniform(0.5, 2.0, None))
            omega = float(rng.uniform(0.5, 2.0, None))
            tau = omega * float(rng.uniform(0.2, 2.0, None))
            # Alternate between the quadratic regime and the one the gamma term dominates
            gamma = 0.0 if k % 2 == 0 else cfg.delta * cfg.eps_train * float(rng.uniform(5.0, 10.0, None))
            limit = SaddleService.g_limit(mu, tau, gamma, omega, cfg)
            estimate, _ = SaddleService.g_monte_carlo(mu, tau, gamma, omega, cfg, 100_000, draws, rng.spawn(k))
            worst = max(worst, ReplicateStats.relative_gap(estimate, limit))
        tol = self._tol(0.01)
        return CriterionResult("g_limit_oracle", worst, tol, worst <= tol, f"{draws} draws per point")

    def check_convex_concave_structure(self) -> CriterionResult:
        cfg = self.base.with_(eps_train=0.5)
        sol = self.saddle.solve_saddle(cfg)
        center = sol.as_vector()
        rng = SeededRng(self.seed).spawn(8)

        def value(z: np.ndarray) -> float:
            alpha, tau_g, beta, gamma, tau_h = z
            return self.saddle.evaluate_D(alpha, beta, gamma, tau_h, tau_g, cfg)

        worst = math.inf
        for block, sign in (((0, 1), 1.0), ((2, 3, 4), -1.0)):
            for _ in range(100):
                ends = []
                for _ in range(2):
                    z = center.copy()
                    z[list(block)] *= 1.0 + 0.1 * rng.uniform(-1.0, 1.0, len(block))
                    ends.append(z)
                mid = 0.5 * (ends[0] + ends[1])
                slack = sign * (0.5 * (value(ends[0]) + value(ends[1])) - value(mid))
                worst = min(worst, slack)
        tol = -self._tol(1e-10)
        return CriterionResult(
            "convex_concave_structure", worst, tol, worst >= tol, "minimum midpoint slack over 200 segments"
        )

    def check_figure_qualitative(self) -> CriterionResult:
        failures = []
        sweeps = SweepService(workers=1)

        rows, _ = SweepService.eps_curve_rows(
            self.base.with_(delta=0.5), np.linspace(0.05, 0.3, 6), False, 0, 0, self.seed
        )
        if not np.all(np.diff([r.sr_theory for r in rows]) < 0):
            failures.append("SR not decreasing in eps at delta=0.5")

        slopes = {}
        for delta in (2.0, 10.0):
            cfg = self.base.with_(delta=delta)
            sr0, _ = self.saddle.asymptotic_risks(self.saddle.solve_saddle(cfg), cfg)
            step_cfg = cfg.with_(eps_train=0.02)
            sr1, _ = self.saddle.asymptotic_risks(self.saddle.solve_saddle(step_cfg), step_cfg)
            slopes[delta] = (sr1 - sr0) / 0.02
        if not slopes[10.0] > slopes[2.0]:
            failures.append(f"small-eps slopes {slopes}")

        grid = np.linspace(0.2, 3.0, 15 if self.quick else 29)
        peaks = []
        for eps in (0.1, 0.4, 0.8):
            rows, _ = SweepService.inv_delta_curve_rows(self.base.with_(eps_train=eps), grid, False, 0, 0, self.seed)
            peaks.append(rows[int(np.argmax([r.sr_theory for r in rows]))].axis_value)
        if not all(b >= a for a, b in zip(peaks, peaks[1:])):
            failures.append(f"double-descent peaks {peaks} move backwards")

        frontier = sweeps.cmd_pareto(self.base, np.geomspace(1e-3, 1e3, 40))
        eps_grid = np.geomspace(0.01, 2.0, 12 if self.quick else 25)
        distances = [
            sweeps.curve_distance(sweeps.cmd_algo_curve(self.base, eps_grid, [delta])[0], frontier)
            for delta in (1.0, 20.0)
        ]
        if not distances[1] < distances[0]:
            failures.append(f"delta=20 curve not closer to the frontier ({distances})")

        return CriterionResult(
            "figure_qualitative", float(len(failures)), 0.0, not failures, "; ".join(failures) or "all four shapes hold"
        )

    def check_finite_sample_risk_oracles(self) -> CriterionResult:
        rng = SeededRng(self.seed).spawn(10)
        p, sigma0, eps_test = 8, 1.0, 0.5
        samples = self._count(1_000_000)
        theta_hat = rng.standard_normal(p)
        theta0 = rng.standard_normal(p)

        x = rng.standard_normal((samples, p))
        y = x @ theta0 + sigma0 * rng.standard_normal(samples)
        residual = np.abs(y - x @ theta_hat)
        standard = residual ** 2 / p
        adversarial = (residual + eps_test * np.linalg.norm(theta_hat)) ** 2 / p

        worst_z = 0.0
        for draws, exact in (
            (standard, RiskService.standard_risk(theta_hat, theta0, sigma0, p)),
            (adversarial, RiskService.adversarial_risk(theta_hat, theta0, sigma0, p, eps_test)),
        ):
            mean, stderr = ReplicateStats.mean_and_stderr(draws)
            worst_z = max(worst_z, abs(mean - exact) / stderr)

        inst = SimulationService.generate_instance(5, 3, self.base, rng.spawn(1))
        theta = rng.standard_normal(3)
        eps = 0.5
        loss = SimulationService.adversarial_loss(theta, inst, eps)
        sampled = max(
            SimulationService.minmax_objective(theta, rng.unit_ball(inst.n, inst.p, eps), inst)
            for _ in range(self._count(10_000))
        )
        worst_case = np.array([
            RiskService.worst_case_perturbation(inst.design[i], inst.labels[i], theta, eps) for i in range(inst.n)
        ])
        equality_gap = abs(SimulationService.minmax_objective(theta, worst_case, inst) - loss)

        tol = self._tol(3.0)
        passed = worst_z <= tol and sampled <= loss + 1e-12 and equality_gap <= 1e-12 * max(1.0, loss)
        return CriterionResult(
            "finite_sample_risk_oracles", worst_z, tol, passed,
            f"max z-score {worst_z:.3g}, sampled max {sampled:.6g} <= loss {loss:.6g}, worst-case gap {equality_gap:.2e}",
        )
