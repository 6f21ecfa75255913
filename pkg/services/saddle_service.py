"""Scalar min-max characterization of the adversarially trained estimator."""
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, optimize, special

from config import config
from exceptions import BoxTooSmallError, ConvergenceError, DomainError, InvalidArgumentError
from logger import setup_logger
from models import AsymptoticConfig, SaddleSolution
from utils.metrics import ReplicateStats
from utils.rng import SeededRng
from utils.validator import Validator

logger = setup_logger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SQRT_2 = math.sqrt(2.0)

# Coordinates of the stacked vector z = (alpha, tau_g | beta, gamma, tau_h)
ALPHA, TAU_G, BETA, GAMMA, TAU_H = range(5)
MIN_BLOCK = slice(0, 2)
MAX_BLOCK = slice(2, 5)

_FD_STEP = 1e-6
_MIN_STEP = 1e-16

# log10 ranges of the (nu, mu) scan
_SCAN_LOG_NU = (-6.0, 4.0)
_SCAN_LOG_MU = (-6.0, 8.0)
_CANDIDATES = 8
_ROOT_TOL = 1e-11
_INFEASIBLE = 1e3


def _characteristic(tau: float, a: float, mu: float) -> float:
    return (
        a
        - tau / mu
        - tau * special.erf(tau / SQRT_2)
        - SQRT_2_OVER_PI * math.exp(-0.5 * tau * tau)
    )


class SaddleService:
    """
    Evaluates and solves the five-variable objective D(alpha, beta, gamma, tau_h, tau_g).

    D is jointly convex in (alpha, tau_g) and concave in (beta, gamma, tau_h)
    near its saddle point. The erf correction is active only when
    gamma (tau_g + beta) / (delta eps beta omega) exceeds sqrt(2 / pi), with
    omega = sqrt(alpha^2 + sigma^2). D is C^1 across that boundary but its
    Hessian jumps, so finite-difference Hessian columns there are one-sided.
    """

    def __init__(
        self,
        stationarity_tol: float = None,
        box_retries: int = None,
        scan_points: int = None,
        polish_iter: int = None,
    ):
        """Initialize solver settings, defaulting to config."""
        self.stationarity_tol = config.SADDLE_STATIONARITY_TOL if stationarity_tol is None else stationarity_tol
        self.box_retries = config.SADDLE_BOX_RETRIES if box_retries is None else box_retries
        self.scan_points = config.SADDLE_SCAN_POINTS if scan_points is None else scan_points
        self.polish_iter = config.SADDLE_POLISH_ITER if polish_iter is None else polish_iter

    # ------------------------------------------------------------------
    # Pointwise formulas
    # ------------------------------------------------------------------

    @staticmethod
    def characteristic(tau: float, a: float, beta: float, tau_g: float) -> float:
        """a - (beta / tau_g) tau - tau erf(tau / sqrt 2) - sqrt(2/pi) exp(-tau^2 / 2)."""
        return _characteristic(tau, a, tau_g / beta)

    @staticmethod
    def tau_star(a: float, beta: float, tau_g: float, max_iter: int = None, tol: float = None) -> float:
        """
        Unique nonnegative root of the characteristic equation.

        Args:
            a: Indicator ratio, at least sqrt(2/pi)
            beta: Positive max-block variable
            tau_g: Positive min-block variable
            max_iter: Bracketing and root-search budget
            tol: Residual tolerance

        Returns:
            tau >= 0 with |characteristic| <= tol

        Raises:
            DomainError: If a < sqrt(2/pi)
            ConvergenceError: If the root cannot be bracketed or polished
        """
        Validator.validate_positive("beta", beta)
        Validator.validate_positive("tau_g", tau_g)
        max_iter = config.TAU_MAX_ITER if max_iter is None else max_iter
        tol = config.TAU_TOL if tol is None else tol

        if a < SQRT_2_OVER_PI:
            raise DomainError(f"indicator ratio {a} is below sqrt(2/pi)")
        if a == SQRT_2_OVER_PI:
            return 0.0

        mu = tau_g / beta
        lo, hi = 0.0, 1.0
        for _ in range(max_iter):
            if _characteristic(hi, a, mu) < 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise ConvergenceError(f"could not bracket tau* for a={a}", residual=_characteristic(hi, a, mu))

        tau = optimize.brentq(
            _characteristic, lo, hi, args=(a, mu), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=max_iter
        )
        # Newton polish; the derivative is -(1/mu + erf(tau / sqrt 2))
        for _ in range(3):
            residual = _characteristic(tau, a, mu)
            if abs(residual) <= tol:
                break
            tau = max(tau + residual / (1.0 / mu + special.erf(tau / SQRT_2)), 0.0)
        residual = _characteristic(tau, a, mu)
        if abs(residual) > tol * max(1.0, a):
            raise ConvergenceError(f"tau* residual {residual:.3e} above tolerance", residual=abs(residual))
        return float(tau)

    @staticmethod
    def indicator_ratio(alpha: float, beta: float, gamma: float, tau_g: float, cfg: AsymptoticConfig) -> float:
        """gamma (tau_g + beta) / (delta eps beta omega)."""
        if gamma == 0:
            return 0.0
        omega = math.hypot(alpha, cfg.sigma)
        return gamma * (tau_g + beta) / (cfg.delta * cfg.eps_train * beta * omega)

    @staticmethod
    def _objective(z: np.ndarray, cfg: AsymptoticConfig) -> Tuple[float, np.ndarray, float, bool]:
        """Value, analytic gradient, tau* and indicator state at z."""
        alpha, tau_g, beta, gamma, tau_h = (float(v) for v in z)
        delta, v = cfg.delta, cfg.v_norm
        omega2 = alpha * alpha + cfg.sigma * cfg.sigma
        omega = math.sqrt(omega2)
        tg_b = tau_g + beta
        s = math.hypot(alpha * beta / tau_h, v)

        value = (
            delta * beta * omega2 / (2.0 * tg_b)
            - alpha * (gamma * gamma + beta * beta) / (2.0 * tau_h)
            + gamma * s
            - alpha * tau_h / 2.0
            + beta * tau_g / 2.0
        )

        grad = np.empty(5)
        grad[ALPHA] = delta * beta * alpha / tg_b - (gamma * gamma + beta * beta) / (2.0 * tau_h) - tau_h / 2.0
        grad[TAU_G] = -delta * beta * omega2 / (2.0 * tg_b ** 2) + beta / 2.0
        grad[BETA] = delta * omega2 * tau_g / (2.0 * tg_b ** 2) - alpha * beta / tau_h + tau_g / 2.0
        grad[GAMMA] = -alpha * gamma / tau_h + s
        grad[TAU_H] = alpha * (gamma * gamma + beta * beta) / (2.0 * tau_h ** 2) - alpha / 2.0
        if s > 0:
            grad[ALPHA] += gamma * alpha * beta ** 2 / (tau_h ** 2 * s)
            grad[BETA] += gamma * alpha ** 2 * beta / (tau_h ** 2 * s)
            grad[TAU_H] -= gamma * alpha ** 2 * beta ** 2 / (tau_h ** 3 * s)

        ratio = SaddleService.indicator_ratio(alpha, beta, gamma, tau_g, cfg)
        active = gamma > 0 and ratio > SQRT_2_OVER_PI
        tau = 0.0
        if active:
            mu = tau_g / beta
            tau = SaddleService.tau_star(ratio, beta, tau_g)
            erf_tau = float(special.erf(tau / SQRT_2))
            scale = delta * omega2 / (2.0 * mu * (mu + 1.0))
            gap = erf_tau - ratio * tau
            value += scale * gap

            # envelope derivatives of the gap: d/da = -2 tau, d/dmu = -tau^2 / mu^2
            d_omega = 2.0 * scale * erf_tau / omega
            d_mu = (
                -scale * (2.0 * mu + 1.0) * gap / (mu * (mu + 1.0))
                - scale * (2.0 * tau * ratio / (mu + 1.0) + tau * tau / (mu * mu))
            )
            grad[ALPHA] += d_omega * alpha / omega
            grad[TAU_G] += d_mu / beta
            grad[BETA] -= d_mu * mu / beta
            grad[GAMMA] += -2.0 * scale * tau * (mu + 1.0) / (delta * cfg.eps_train * omega)

        return value, grad, tau, active

    @staticmethod
    def _check_point(alpha: float, beta: float, gamma: float, tau_h: float, tau_g: float, cfg: AsymptoticConfig):
        if tau_h <= 0 or tau_g <= 0:
            raise InvalidArgumentError(f"tau_h and tau_g must be positive, got {tau_h}, {tau_g}")
        if beta <= 0:
            raise InvalidArgumentError(f"beta must be positive, got {beta}")
        if alpha < 0 or gamma < 0:
            raise InvalidArgumentError(f"alpha and gamma must be nonnegative, got {alpha}, {gamma}")
        if cfg.eps_train <= 0:
            raise DomainError("D is defined for eps_train > 0; eps_train = 0 uses the closed form")
        if alpha == 0 and cfg.sigma == 0:
            raise InvalidArgumentError("alpha and sigma cannot both vanish")

    def evaluate_D(
        self,
        alpha: float,
        beta: float,
        gamma: float,
        tau_h: float,
        tau_g: float,
        cfg: AsymptoticConfig,
    ) -> float:
        """
        Evaluate the scalar objective.

        Raises:
            InvalidArgumentError: If tau_h or tau_g is nonpositive
            DomainError: If eps_train = 0
        """
        self._check_point(alpha, beta, gamma, tau_h, tau_g, cfg)
        return self._objective(np.array([alpha, tau_g, beta, gamma, tau_h]), cfg)[0]

    def gradient(
        self,
        alpha: float,
        beta: float,
        gamma: float,
        tau_h: float,
        tau_g: float,
        cfg: AsymptoticConfig,
    ) -> np.ndarray:
        """Analytic gradient in the order (alpha, tau_g, beta, gamma, tau_h)."""
        self._check_point(alpha, beta, gamma, tau_h, tau_g, cfg)
        return self._objective(np.array([alpha, tau_g, beta, gamma, tau_h]), cfg)[1]

    def erf_term(self, alpha: float, beta: float, gamma: float, tau_g: float, cfg: AsymptoticConfig) -> float:
        """The indicator-gated erf contribution of D; 0 when inactive."""
        self._check_point(alpha, beta, gamma, 1.0, tau_g, cfg)
        ratio = self.indicator_ratio(alpha, beta, gamma, tau_g, cfg)
        if gamma == 0 or ratio <= SQRT_2_OVER_PI:
            return 0.0
        mu = tau_g / beta
        tau = self.tau_star(ratio, beta, tau_g)
        scale = cfg.delta * (alpha ** 2 + cfg.sigma ** 2) / (2.0 * mu * (mu + 1.0))
        return scale * (float(special.erf(tau / SQRT_2)) - ratio * tau)

    # ------------------------------------------------------------------
    # Limit of the soft-thresholding functional
    # ------------------------------------------------------------------

    @staticmethod
    def g_limit(mu, tau, gamma: float, omega: float, cfg: AsymptoticConfig):
        """
        Large-n limit of (1/n) G(w; mu, tau) for w ~ N(0, omega^2 I_n).

        Vectorized over tau.
        """
        if mu <= 0 or omega <= 0:
            raise InvalidArgumentError(f"mu and omega must be positive, got {mu}, {omega}")
        if cfg.eps_train <= 0:
            raise DomainError("the G limit needs eps_train > 0")
        u = np.asarray(tau, dtype=float) / omega
        if np.any(u < 0):
            raise InvalidArgumentError("tau must be nonnegative")
        kernel = SQRT_2_OVER_PI * np.exp(-0.5 * u * u)
        tail = special.erfc(u / SQRT_2)
        quad = omega ** 2 / (2.0 * mu * (mu + 1.0)) * ((1.0 - u * kernel) + (u * u - 1.0) * tail)
        lin = gamma * (mu + 1.0) / (cfg.delta * cfg.eps_train * omega) + u * tail - kernel
        value = quad - omega ** 2 / (2.0 * (mu + 1.0) ** 2) * np.maximum(lin, 0.0) ** 2
        return float(value) if np.ndim(value) == 0 else value

    @staticmethod
    def soft_threshold(w: np.ndarray, tau: float) -> np.ndarray:
        return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)

    @staticmethod
    def g_monte_carlo(
        mu: float,
        tau: float,
        gamma: float,
        omega: float,
        cfg: AsymptoticConfig,
        n: int,
        draws: int,
        rng: SeededRng,
    ) -> Tuple[float, float]:
        """
        Finite-n Monte Carlo of (1/n) G(w; mu, tau).

        Args:
            mu, tau, gamma, omega: Arguments of the G functional
            cfg: Supplies delta and eps_train
            n: Vector length
            draws: Number of independent vectors
            rng: Master stream; draw k uses rng.spawn(k)

        Returns:
            (mean, standard error) across draws
        """
        Validator.validate_count("n", n)
        Validator.validate_count("draws", draws)
        values = np.empty(draws)
        for k in range(draws):
            w = omega * rng.spawn(k).standard_normal(n)
            shrunk = SaddleService.soft_threshold(w, tau)
            quad = float(np.sum((w - shrunk) ** 2)) / (2.0 * mu * (mu + 1.0) * n)
            lin = gamma / (cfg.delta * cfg.eps_train) - float(np.sum(np.abs(shrunk))) / (n * (1.0 + mu))
            values[k] = quad - 0.5 * max(lin, 0.0) ** 2
        return ReplicateStats.mean_and_stderr(values)

    # ------------------------------------------------------------------
    # Saddle point solver
    # ------------------------------------------------------------------

    @staticmethod
    def box_bounds(cfg: AsymptoticConfig) -> Tuple[float, float]:
        """Initial (K_alpha, K_beta)."""
        k_alpha = 100.0 * max(1.0, cfg.sigma, cfg.v_norm)
        k_beta = 100.0 * cfg.sigma * (1.0 + math.sqrt(cfg.delta)) + 100.0
        return k_alpha, k_beta

    @staticmethod
    def closed_form(cfg: AsymptoticConfig) -> SaddleSolution:
        """Saddle point at eps_train = 0 (least squares, delta > 1)."""
        if cfg.delta <= 1:
            raise DomainError(f"eps_train = 0 requires delta > 1, got {cfg.delta}")
        alpha = cfg.sigma / math.sqrt(cfg.delta - 1.0)
        beta = cfg.sigma * math.sqrt(cfg.delta - 1.0)
        if cfg.sigma == 0:
            return SaddleSolution(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, True)
        z = np.array([alpha, alpha, beta, 0.0, beta])
        value, grad, _, _ = SaddleService._objective(z, cfg)
        stationarity = float(max(np.linalg.norm(grad[MIN_BLOCK]), np.linalg.norm(grad[[BETA, TAU_H]])))
        return SaddleSolution(alpha, beta, 0.0, beta, alpha, 0.0, value, stationarity, 0, True)

    @staticmethod
    def _lower_open(i: int) -> bool:
        return i in (TAU_G, BETA, TAU_H)

    def _hessian(self, z: np.ndarray, cfg: AsymptoticConfig, columns: Sequence[int]) -> np.ndarray:
        """
        Central differences of the analytic gradient.

        A column whose two evaluations sit on different sides of the indicator
        boundary is replaced by the one-sided difference on the side of z.
        """
        _, g0, _, state0 = self._objective(z, cfg)
        hess = np.empty((5, len(columns)))
        for col, i in enumerate(columns):
            h = _FD_STEP * (abs(z[i]) + _FD_STEP)
            up = z.copy()
            up[i] += h
            _, g_up, _, s_up = self._objective(up, cfg)
            down = z.copy()
            down[i] -= h
            feasible_down = down[i] > 0 if self._lower_open(i) else down[i] >= 0
            if not feasible_down:
                hess[:, col] = (g_up - g0) / h
                continue
            _, g_down, _, s_down = self._objective(down, cfg)
            if s_up == s_down:
                hess[:, col] = (g_up - g_down) / (2.0 * h)
            elif s_up == state0:
                hess[:, col] = (g_up - g0) / h
            else:
                hess[:, col] = (g0 - g_down) / h
        return hess

    @staticmethod
    def _projected_min_gradient(z: np.ndarray, grad: np.ndarray, k_alpha: float) -> np.ndarray:
        pg = grad[MIN_BLOCK].copy()
        if (z[ALPHA] <= 0 and pg[0] > 0) or (z[ALPHA] >= k_alpha and pg[0] < 0):
            pg[0] = 0.0
        return pg

    @staticmethod
    def _projected_max_gradient(z: np.ndarray, grad: np.ndarray, k_beta: float) -> np.ndarray:
        pg = grad[MAX_BLOCK].copy()
        if z[GAMMA] <= 0 and pg[1] < 0:
            pg[1] = 0.0
        if z[BETA] >= k_beta and pg[0] > 0:
            pg[0] = 0.0
        return pg

    @staticmethod
    def zero_estimator_threshold(cfg: AsymptoticConfig) -> float:
        """
        Smallest eps_train at which the trained estimator is exactly zero.

        theta = 0 minimizes the empirical adversarial loss once
        ||X^T y|| / n <= eps_train mean|y|, which in the limit reads
        eps_train >= sqrt(V^2 + (V^2 + sigma^2) / delta) / (sqrt(2/pi) sqrt(V^2 + sigma^2)).

        Raises:
            DomainError: If sigma = V = 0
        """
        signal = cfg.v_norm ** 2 + cfg.sigma ** 2
        if signal == 0:
            raise DomainError("the zero-estimator threshold needs sigma or V positive")
        return math.sqrt(cfg.v_norm ** 2 + signal / cfg.delta) / (SQRT_2_OVER_PI * math.sqrt(signal))

    @staticmethod
    def zero_estimator_solution(cfg: AsymptoticConfig) -> SaddleSolution:
        """Boundary saddle point (tau_g = 0) above zero_estimator_threshold."""
        delta, v = cfg.delta, cfg.v_norm
        omega2 = v * v + cfg.sigma ** 2
        return SaddleSolution(
            alpha=v,
            beta=math.sqrt(delta * omega2),
            gamma=delta * math.sqrt(v * v + omega2 / delta),
            tau_h=delta * v,
            tau_g=0.0,
            tau_star=0.0,
            d_value=0.5 * delta * omega2,
            stationarity=0.0,
            iterations=0,
            closed_form=True,
        )

    @staticmethod
    def _reduced_system(nu, mu, cfg: AsymptoticConfig) -> Tuple[np.ndarray, np.ndarray, dict]:
        """
        Saddle conditions of D reduced to two unknowns.

        nu = ||theta_hat|| / (sqrt(p) omega) and mu = tau_g / beta. Given both,
        tau* = eps mu nu and the indicator ratio a are explicit, and the
        stationarity equations in alpha, beta, gamma and tau_h fix
        beta / omega, alpha / tau_h, gamma / omega and alpha^2 / omega^2 = m.
        The two remaining equations are returned as residuals; infeasible
        points get nan. Vectorized over nu and mu.

        Returns:
            (r_mu, r_omega, parts) with parts holding t, a, b_hat, x and m
        """
        eps, delta = cfg.eps_train, cfg.delta
        sigma2, v2 = cfg.sigma ** 2, cfg.v_norm ** 2
        nu = np.asarray(nu, dtype=float)
        mu = np.asarray(mu, dtype=float)
        with np.errstate(all="ignore"):
            t = eps * mu * nu
            erf_t = special.erf(t / SQRT_2)
            a = eps * nu + t * erf_t + SQRT_2_OVER_PI * np.exp(-0.5 * t * t)
            gap = erf_t - a * t
            mu1 = mu + 1.0
            f = 1.0 / mu1 + gap / (mu * mu1)
            f_a = -2.0 * t / (mu * mu1)
            f_mu = -1.0 / mu1 ** 2 - t * t / (mu ** 3 * mu1) - gap * (2.0 * mu + 1.0) / (mu * mu1) ** 2
            k1 = -(f_mu + a * f_a / mu1)
            k2 = 2.0 * f - a * f_a
            # k1 = beta^2 / (delta omega^2) and k2 = 2 tau_h / (delta alpha)
            x = 2.0 / (delta * k2)
            b_hat = np.sqrt(delta * np.maximum(k1, 0.0))
            r = b_hat * x
            c = a * delta * eps * x / mu1
            s = c + nu
            m = c * c + r * r - 2.0 * c * r * r / s
            r_mu = 1.0 - x * nu / (s * mu)
            r_omega = (sigma2 * (s * s - r * r) - v2 * (1.0 - m)) / (sigma2 + v2)
            feasible = (
                (k1 > 0) & (k2 > 0) & (m > 0) & (m < 1) & (s > r)
                & np.isfinite(r_mu) & np.isfinite(r_omega)
            )
        parts = {"t": t, "a": a, "b_hat": b_hat, "x": x, "m": m}
        return np.where(feasible, r_mu, np.nan), np.where(feasible, r_omega, np.nan), parts

    def _point_from_reduced(self, nu: float, mu: float, cfg: AsymptoticConfig) -> np.ndarray:
        _, _, parts = self._reduced_system(nu, mu, cfg)
        m = float(parts["m"])
        omega = cfg.sigma / math.sqrt(1.0 - m)
        alpha = omega * math.sqrt(m)
        beta = float(parts["b_hat"]) * omega
        gamma = float(parts["a"]) * cfg.delta * cfg.eps_train * omega / (mu + 1.0)
        return np.array([alpha, mu * beta, beta, gamma, alpha / float(parts["x"])])

    def _reduced_starts(self, cfg: AsymptoticConfig, warm_start: Optional[SaddleSolution]) -> List[Tuple[float, float]]:
        """Warm start and small-eps limit mapped to (nu, mu)."""
        starts = []
        if warm_start is not None and warm_start.tau_g > 0 and warm_start.beta > 0 and warm_start.tau_h > 0:
            ratio = warm_start.alpha / warm_start.tau_h
            s = math.hypot(ratio * warm_start.beta, cfg.v_norm)
            nu = (s - warm_start.gamma * ratio) / math.hypot(warm_start.alpha, cfg.sigma)
            if nu > 0:
                starts.append((nu, warm_start.tau_g / warm_start.beta))
        if cfg.delta > 1:
            sigma2, v2 = cfg.sigma ** 2, cfg.v_norm ** 2
            nu = math.sqrt((v2 * (cfg.delta - 1.0) + sigma2) / (sigma2 * cfg.delta))
            starts.append((nu, 1.0 / (cfg.delta - 1.0)))
        return starts

    def _scan_starts(self, cfg: AsymptoticConfig) -> List[Tuple[float, float]]:
        """Local minima of the reduced residual on a log grid, best first."""
        nu, mu = np.meshgrid(
            np.logspace(*_SCAN_LOG_NU, self.scan_points),
            np.logspace(*_SCAN_LOG_MU, self.scan_points),
            indexing="ij",
        )
        r_mu, r_omega, _ = self._reduced_system(nu, mu, cfg)
        size = np.hypot(r_mu, r_omega)
        size[np.isnan(size)] = np.inf
        minima = np.isfinite(size) & (size == ndimage.minimum_filter(size, size=3, mode="nearest"))
        idx = np.flatnonzero(minima)
        idx = idx[np.argsort(size.flat[idx])][:_CANDIDATES]
        logger.debug(f"Reduced scan kept {idx.size} candidates at delta={cfg.delta}, eps={cfg.eps_train}")
        return [(float(nu.flat[i]), float(mu.flat[i])) for i in idx]

    def _candidates(self, cfg: AsymptoticConfig, warm_start: Optional[SaddleSolution]) -> Iterator[Tuple[float, float]]:
        yield from self._reduced_starts(cfg, warm_start)
        yield from self._scan_starts(cfg)

    def _polish_reduced(self, nu: float, mu: float, cfg: AsymptoticConfig) -> optimize.OptimizeResult:
        """Levenberg-Marquardt on the reduced residuals in (log nu, log mu)."""

        def residuals(u: np.ndarray) -> np.ndarray:
            with np.errstate(over="ignore"):
                nu_u, mu_u = np.exp(u)
            r_mu, r_omega, _ = self._reduced_system(nu_u, mu_u, cfg)
            if np.isnan(r_mu) or np.isnan(r_omega):
                return np.full(2, _INFEASIBLE)
            return np.array([float(r_mu), float(r_omega)])

        return optimize.least_squares(
            residuals,
            np.log([nu, mu]),
            method="lm",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=50 * self.polish_iter,
        )

    def _stationarity(self, z: np.ndarray, cfg: AsymptoticConfig, k_alpha: float, k_beta: float) -> float:
        _, grad, _, _ = self._objective(z, cfg)
        return max(
            float(np.linalg.norm(self._projected_max_gradient(z, grad, k_beta))),
            float(np.linalg.norm(self._projected_min_gradient(z, grad, k_alpha))),
        )

    @staticmethod
    def _interior(z: np.ndarray) -> bool:
        return z[ALPHA] > 0 and z[TAU_G] > 0 and z[BETA] > 0 and z[GAMMA] >= 0 and z[TAU_H] > 0

    def _newton_polish(self, z: np.ndarray, cfg: AsymptoticConfig) -> np.ndarray:
        """Newton steps on grad D = 0, accepted only when the gradient norm drops."""
        grad = self._objective(z, cfg)[1]
        norm = float(np.linalg.norm(grad))
        for _ in range(self.polish_iter):
            if norm <= self.stationarity_tol:
                break
            hess = self._hessian(z, cfg, range(5))
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            t = 1.0
            while t > _MIN_STEP:
                trial = z + t * step
                if self._interior(trial):
                    t_grad = self._objective(trial, cfg)[1]
                    t_norm = float(np.linalg.norm(t_grad))
                    if t_norm < norm:
                        break
                t *= 0.5
            else:
                break
            z, grad, norm = trial, t_grad, t_norm
        return z

    def _solve_reduced(self, cfg: AsymptoticConfig, warm_start: Optional[SaddleSolution]) -> Tuple[np.ndarray, int]:
        evaluations = 0
        best = math.inf
        for nu, mu in self._candidates(cfg, warm_start):
            fit = self._polish_reduced(nu, mu, cfg)
            evaluations += fit.nfev
            residual = float(np.max(np.abs(fit.fun)))
            best = min(best, residual)
            if residual > _ROOT_TOL:
                logger.debug(f"Candidate nu={nu:.3e}, mu={mu:.3e} stopped at residual {residual:.3e}")
                continue
            z = self._point_from_reduced(float(np.exp(fit.x[0])), float(np.exp(fit.x[1])), cfg)
            if self._stationarity(z, cfg, math.inf, math.inf) > self.stationarity_tol:
                z = self._newton_polish(z, cfg)
            if self._interior(z) and self._stationarity(z, cfg, math.inf, math.inf) <= self.stationarity_tol:
                return z, evaluations
        raise ConvergenceError(
            f"no saddle point found after {evaluations} evaluations, best reduced residual {best:.3e}",
            residual=best,
        )

    def solve_saddle(self, cfg: AsymptoticConfig, warm_start: Optional[SaddleSolution] = None) -> SaddleSolution:
        """
        Saddle point of max over (beta, gamma, tau_h) of min over (alpha, tau_g) of D.

        Solves the stationarity conditions through their reduction to
        (nu, mu), starting from the warm start, the small-eps limit and then a
        log-grid scan, and certifies the five-variable projected gradient.
        Above zero_estimator_threshold the saddle point sits on tau_g = 0 and
        is returned in closed form.

        Args:
            cfg: Problem parameters
            warm_start: Solution at a nearby configuration, if any

        Returns:
            SaddleSolution with stationarity within tolerance

        Raises:
            DomainError: Outside the region where the characterization holds
            BoxTooSmallError: If the saddle point lies outside the boxes after all enlargements
            ConvergenceError: If no candidate reaches a certified saddle point
        """
        Validator.validate_saddle_config(cfg)
        if cfg.eps_train == 0:
            return self.closed_form(cfg)
        if cfg.sigma <= 0:
            raise DomainError("the saddle solver needs sigma > 0")
        if cfg.eps_train >= self.zero_estimator_threshold(cfg):
            logger.debug(f"eps={cfg.eps_train} is above the zero-estimator threshold at delta={cfg.delta}")
            return self.zero_estimator_solution(cfg)

        try:
            z, evaluations = self._solve_reduced(cfg, warm_start)
        except ConvergenceError as e:
            logger.error(f"Saddle solver failed: {e}")
            raise e.annotate(delta=cfg.delta, eps=cfg.eps_train)

        # the reduced root is unconstrained; enlargements re-check the same point
        k_alpha, k_beta = self.box_bounds(cfg)
        for attempt in range(self.box_retries + 1):
            if z[ALPHA] < k_alpha and z[BETA] < k_beta:
                break
            if attempt == self.box_retries:
                logger.error(f"Saddle point still outside the box after {attempt} enlargements")
                raise BoxTooSmallError(
                    f"saddle point (alpha={z[ALPHA]:.3e}, beta={z[BETA]:.3e}) outside "
                    f"K_alpha={k_alpha}, K_beta={k_beta}",
                    residual=0.0,
                ).annotate(delta=cfg.delta, eps=cfg.eps_train)
            k_alpha, k_beta = 2.0 * k_alpha, 2.0 * k_beta
            logger.warning(f"Enlarging saddle boxes to K_alpha={k_alpha}, K_beta={k_beta}")

        value, _, tau, _ = self._objective(z, cfg)
        stationarity = self._stationarity(z, cfg, k_alpha, k_beta)
        logger.debug(
            f"Saddle at delta={cfg.delta}, eps={cfg.eps_train}: alpha={z[ALPHA]:.10g} "
            f"after {evaluations} residual evaluations"
        )
        return SaddleSolution(
            alpha=float(z[ALPHA]),
            beta=float(z[BETA]),
            gamma=float(z[GAMMA]),
            tau_h=float(z[TAU_H]),
            tau_g=float(z[TAU_G]),
            tau_star=float(tau),
            d_value=float(value),
            stationarity=stationarity,
            iterations=evaluations,
        )

    def verify_local_saddle(
        self, sol: SaddleSolution, cfg: AsymptoticConfig, directions: int, rng: SeededRng, radius: float = 1e-3
    ) -> float:
        """
        Worst improvement either player finds along random directions.

        Moves the min block (resp. max block) by radius times the coordinate
        scale and records how much D drops (resp. rises). A saddle point gives
        values at or below roundoff.
        """
        z = sol.as_vector()
        value = self._objective(z, cfg)[0]
        scale = np.maximum(np.abs(z), 1e-3)
        worst = -math.inf
        for _ in range(directions):
            for block, sign in ((MIN_BLOCK, 1.0), (MAX_BLOCK, -1.0)):
                d = rng.standard_normal(block.stop - block.start)
                d /= np.linalg.norm(d)
                trial = z.copy()
                trial[block] += radius * scale[block] * d
                if trial[GAMMA] < 0:
                    trial[GAMMA] = 0.0
                worst = max(worst, sign * (value - self._objective(trial, cfg)[0]))
        return worst

    # ------------------------------------------------------------------
    # Risks
    # ------------------------------------------------------------------

    @staticmethod
    def estimator_norm(sol: SaddleSolution, cfg: AsymptoticConfig) -> float:
        """Limit of ||theta_hat|| / sqrt(p)."""
        if cfg.eps_train == 0:
            if cfg.delta <= 1:
                raise DomainError(f"eps_train = 0 requires delta > 1, got {cfg.delta}")
            return math.sqrt(cfg.v_norm ** 2 + cfg.sigma ** 2 / (cfg.delta - 1.0))
        if sol.tau_g == 0:
            return 0.0
        omega = math.hypot(sol.alpha, cfg.sigma)
        return sol.beta * sol.tau_star * omega / (cfg.eps_train * sol.tau_g)

    @staticmethod
    def asymptotic_risks(sol: SaddleSolution, cfg: AsymptoticConfig) -> Tuple[float, float]:
        """
        Limiting (SR, AR) of the adversarially trained estimator.

        Args:
            sol: Saddle point for cfg
            cfg: Problem parameters; eps_test is the evaluation budget

        Returns:
            (sr, ar)
        """
        sr = cfg.sigma ** 2 + sol.alpha ** 2
        norm = SaddleService.estimator_norm(sol, cfg)
        e = cfg.eps_test
        ar = sr + e ** 2 * norm ** 2 + 2.0 * SQRT_2_OVER_PI * e * norm * math.sqrt(sr)
        return sr, ar

    @staticmethod
    def sr_small_eps(cfg: AsymptoticConfig) -> Tuple[float, float]:
        """
        Intercept and slope of SR in eps_train at eps_train = 0.

        Raises:
            DomainError: If delta <= 1
        """
        delta, sigma, v = cfg.delta, cfg.sigma, cfg.v_norm
        if delta <= 1:
            raise DomainError(f"small-eps expansion needs delta > 1, got {delta}")
        intercept = delta * sigma ** 2 / (delta - 1.0)
        root = math.sqrt(sigma ** 2 + v ** 2 * (delta - 1.0))
        if root == 0:
            return intercept, 0.0
        slope = -2.0 * SQRT_2_OVER_PI * sigma ** 3 * delta ** 1.5 / ((delta - 1.0) ** 2 * root)
        return intercept, slope
