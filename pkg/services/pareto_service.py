"""Pareto-optimal standard/adversarial risk tradeoff in the infinite-data limit."""
import math
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import optimize

from config import config
from exceptions import (
    ConvergenceError,
    DomainError,
    InternalConsistencyError,
    InvalidArgumentError,
    RootMultiplicityError,
)
from logger import setup_logger
from models import AsymptoticConfig, KnobKind, ParetoSolution, RiskPoint, RiskSource
from utils.validator import Validator

logger = setup_logger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SCAN_POINTS = 2001
_MAX_BRACKET_DOUBLINGS = 200


class ParetoService:
    """
    Fixed-point characterization of the estimators theta0 / (1 + gamma0)
    minimizing lambda * SR + AR.
    """

    def __init__(
        self,
        damping: float = None,
        max_iter: int = None,
        residual_tol: float = None,
    ):
        """Initialize with solver settings, defaulting to config."""
        self.damping = config.PARETO_DAMPING if damping is None else damping
        self.max_iter = config.PARETO_MAX_ITER if max_iter is None else max_iter
        self.residual_tol = config.PARETO_RESIDUAL_TOL if residual_tol is None else residual_tol
        if not 0 < self.damping <= 1:
            raise InvalidArgumentError(f"damping must be in (0, 1], got {self.damping}")

    @staticmethod
    def shrinkage_scale(gamma0: float, cfg: AsymptoticConfig) -> float:
        """A = ((1 + gamma0)^2 sigma^2 + gamma0^2 V^2)^(1/2) / V."""
        return math.hypot((1.0 + gamma0) * cfg.sigma, gamma0 * cfg.v_norm) / cfg.v_norm

    @staticmethod
    def fixed_point_map(gamma0: float, lam: float, cfg: AsymptoticConfig) -> float:
        e = cfg.eps_test
        a = ParetoService.shrinkage_scale(gamma0, cfg)
        return (e ** 2 + SQRT_2_OVER_PI * e * a) / (1.0 + lam + SQRT_2_OVER_PI * e / a)

    @staticmethod
    def pareto_risks(gamma0: float, cfg: AsymptoticConfig) -> Tuple[float, float]:
        """
        Asymptotic risks of theta0 / (1 + gamma0).

        Args:
            gamma0: Shrinkage coefficient
            cfg: Problem parameters (eps_test is the test budget)

        Returns:
            (sr, ar)
        """
        Validator.validate_nonnegative("gamma0", gamma0)
        sigma, v, e = cfg.sigma, cfg.v_norm, cfg.eps_test
        shrink = 1.0 / (1.0 + gamma0)
        bias = gamma0 * shrink * v
        sr = sigma ** 2 + bias ** 2
        ar = (
            sr
            + e ** 2 * v ** 2 * shrink ** 2
            + 2.0 * SQRT_2_OVER_PI * e * v * shrink * math.sqrt(sr)
        )
        return sr, ar

    def pareto_fixed_point(self, lam: float, cfg: AsymptoticConfig) -> ParetoSolution:
        """
        Solve the shrinkage fixed point for weight lam.

        Damped iteration from gamma = eps_test^2; if it stagnates, a bracketing
        root search on the defect gamma - g(gamma).

        Args:
            lam: Weight on the standard risk
            cfg: Problem parameters; v_norm must be positive

        Returns:
            ParetoSolution with residual at most the configured tolerance

        Raises:
            ConvergenceError: If no root meets the tolerance
            RootMultiplicityError: If the defect has several sign changes
        """
        lam = Validator.validate_nonnegative("lambda", lam)
        if cfg.v_norm <= 0:
            raise InvalidArgumentError("the Pareto curve needs v_norm > 0")

        if cfg.eps_test == 0:
            sr, ar = self.pareto_risks(0.0, cfg)
            return ParetoSolution(lam, 0.0, self.shrinkage_scale(0.0, cfg), sr, ar, 0.0, 0)

        def g(gamma: float) -> float:
            return self.fixed_point_map(gamma, lam, cfg)

        gamma, iterations, residual = self._damped_iteration(g, cfg.eps_test ** 2)
        if residual > self.residual_tol:
            logger.warning(
                f"Damped iteration stalled at lambda={lam} (residual {residual:.3e}), bracketing instead"
            )
            gamma = self._bracketed_root(lambda t: t - g(t), lam)
            residual = abs(gamma - g(gamma))
        self._check_single_root(lambda t: t - g(t), gamma, lam)

        if residual > self.residual_tol:
            raise ConvergenceError(
                f"Pareto fixed point did not converge (residual {residual:.3e})",
                residual=residual,
                context={"lambda": lam},
            )

        sr, ar = self.pareto_risks(gamma, cfg)
        logger.debug(f"Pareto fixed point lambda={lam}: gamma0={gamma:.12g} after {iterations} iterations")
        return ParetoSolution(lam, gamma, self.shrinkage_scale(gamma, cfg), sr, ar, residual, iterations)

    def _damped_iteration(self, g: Callable[[float], float], start: float) -> Tuple[float, int, float]:
        gamma = start
        best_gamma, best_residual = gamma, abs(gamma - g(gamma))
        for iteration in range(1, self.max_iter + 1):
            gamma = (1.0 - self.damping) * gamma + self.damping * g(gamma)
            residual = abs(gamma - g(gamma))
            if not math.isfinite(residual):
                break
            if residual < best_residual:
                best_gamma, best_residual = gamma, residual
            if residual <= self.residual_tol:
                return gamma, iteration, residual
        return best_gamma, self.max_iter, best_residual

    @staticmethod
    def _bracket_upper(h: Callable[[float], float], start: float = 1.0) -> float:
        hi = start
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            if h(hi) > 0:
                return hi
            hi *= 2.0
        raise ConvergenceError("could not bracket the fixed-point defect", residual=h(hi))

    @staticmethod
    def _bracketed_root(h: Callable[[float], float], lam: float) -> float:
        if h(0.0) >= 0:
            return 0.0
        hi = ParetoService._bracket_upper(h)
        return optimize.brentq(h, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    @staticmethod
    def _check_single_root(h: Callable[[float], float], root: float, lam: float) -> None:
        hi = ParetoService._bracket_upper(h, max(1.0, 2.0 * root))
        values = np.array([h(t) for t in np.linspace(0.0, hi, _SCAN_POINTS)])
        signs = np.sign(values[np.abs(values) > 1e-14])
        changes = int(np.count_nonzero(np.diff(signs)))
        if changes > 1:
            raise RootMultiplicityError(
                f"fixed-point defect changes sign {changes} times on [0, {hi}] at lambda={lam}"
            )

    def pareto_curve(self, lambdas: Sequence[float], cfg: AsymptoticConfig) -> List[RiskPoint]:
        """
        Trace the Pareto curve over a lambda grid.

        Args:
            lambdas: Nonempty list of weights
            cfg: Problem parameters

        Returns:
            One RiskPoint per lambda, in input order

        Raises:
            ConvergenceError: Annotated with the offending lambda
        """
        lambdas = Validator.validate_grid("lambda", lambdas)
        points = []
        for lam in lambdas:
            try:
                sol = self.pareto_fixed_point(lam, cfg)
            except ConvergenceError as e:
                logger.error(f"Pareto curve failed at lambda={lam}: {e}")
                raise e.annotate(**{"lambda": lam})
            points.append(RiskPoint(sol.sr, sol.ar, RiskSource.PARETO_THEORY, lam, KnobKind.LAMBDA))
        logger.info(f"Traced Pareto curve over {len(points)} lambda values")
        return points

    def lambda_to_epsilon(self, lam: float, cfg: AsymptoticConfig) -> float:
        """
        Training budget whose infinite-data adversarial estimator is Pareto
        optimal for weight lam.

        Args:
            lam: Weight on the standard risk
            cfg: Problem parameters

        Returns:
            The larger root of the quadratic in eps, clamped at 0

        Raises:
            InternalConsistencyError: On a negative discriminant
        """
        sol = self.pareto_fixed_point(lam, cfg)
        e, a = cfg.eps_test, sol.a_lambda
        c = SQRT_2_OVER_PI

        quad = 1.0 + lam + 2.0 * c * e / a + (e / a) ** 2
        lin = c * (a * (1.0 + lam) + c * e)
        const = -(e ** 2 + c * e * a)

        disc = lin ** 2 - 4.0 * quad * const
        if disc < 0:
            raise InternalConsistencyError(f"negative discriminant {disc} at lambda={lam}")
        if const == 0:
            return 0.0
        # -2c / (b + sqrt(disc)) is the larger root without cancellation
        root = -2.0 * const / (lin + math.sqrt(disc))
        return max(root, 0.0)

    @staticmethod
    def infinite_data_fixed_point(eps: float, cfg: AsymptoticConfig) -> Tuple[float, float]:
        """
        Shrinkage of the adversarially trained estimator as delta -> infinity.

        Solves gamma = (eps^2 + c eps A) / (1 - (eps / A)^2) in the cleared
        form gamma (1 - (eps / A)^2) - (eps^2 + c eps A) = 0.

        Args:
            eps: Training budget
            cfg: Problem parameters; v_norm must be positive

        Returns:
            (gamma0, A)

        Raises:
            DomainError: If the budget is too large for a finite shrinkage
        """
        eps = Validator.validate_nonnegative("eps", eps)
        if cfg.v_norm <= 0:
            raise InvalidArgumentError("the infinite-data fixed point needs v_norm > 0")
        if eps == 0:
            return 0.0, ParetoService.shrinkage_scale(0.0, cfg)

        def h(gamma: float) -> float:
            a = ParetoService.shrinkage_scale(gamma, cfg)
            return gamma * (1.0 - (eps / a) ** 2) - (eps ** 2 + SQRT_2_OVER_PI * eps * a)

        slope = 1.0 - SQRT_2_OVER_PI * eps * math.hypot(cfg.sigma, cfg.v_norm) / cfg.v_norm
        if slope <= 0:
            raise DomainError(f"eps={eps} admits no finite infinite-data shrinkage")

        # A(0) = 0 without noise, so start just above the origin
        lo = 0.0 if cfg.sigma > 0 else 1e-6 * eps ** 2
        hi = ParetoService._bracket_upper(h)
        gamma = optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return gamma, ParetoService.shrinkage_scale(gamma, cfg)

    @staticmethod
    def is_non_dominated(points: Sequence[RiskPoint]) -> List[bool]:
        """Pairwise dominance scan over (sr, ar)."""
        flags = [True] * len(points)
        for i, candidate in enumerate(points):
            for j, other in enumerate(points):
                if i != j and other.dominates(candidate):
                    flags[i] = False
                    break
        return flags
