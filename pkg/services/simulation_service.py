"""Finite-sample Gaussian instances and the adversarially trained estimator."""
import math
from multiprocessing import Pool
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from config import config
from exceptions import ConvergenceError, InvalidArgumentError
from logger import setup_logger
from models import (
    AsymptoticConfig,
    FiniteInstance,
    KnobKind,
    ReplicateSummary,
    RiskPoint,
    RiskSource,
    TrainReport,
)
from services.risk_service import RiskService
from utils.rng import SeededRng
from utils.validator import Validator

logger = setup_logger(__name__)

_LEVELS = 16
_NEWTON_PER_LEVEL = 60
_KINK_WIDTH = 1e3
_ARMIJO = 1e-4


class SimulationService:
    """Generates instances, trains the estimator and measures its risks."""

    def __init__(self, tol: float = None, max_iter: int = None):
        """Initialize with training settings, defaulting to config."""
        self.tol = config.TRAIN_TOL if tol is None else tol
        self.max_iter = config.TRAIN_MAX_ITER if max_iter is None else max_iter

    @staticmethod
    def generate_instance(n: int, p: int, cfg: AsymptoticConfig, rng: SeededRng) -> FiniteInstance:
        """
        Draw y = X theta0 + w with X, w Gaussian and ||theta0||^2 = p V^2.

        Args:
            n: Sample count
            p: Parameter count
            cfg: Supplies sigma and v_norm
            rng: Stream consumed in the order X, theta0, w

        Returns:
            FiniteInstance with sigma0 = sigma sqrt(p)
        """
        Validator.validate_count("n", n)
        Validator.validate_count("p", p)
        design = rng.standard_normal((n, p))
        direction = rng.standard_normal(p)
        theta0 = direction * (cfg.v_norm * math.sqrt(p) / np.linalg.norm(direction))
        sigma0 = cfg.sigma * math.sqrt(p)
        noise = sigma0 * rng.standard_normal(n)
        labels = design @ theta0 + noise
        return FiniteInstance(design=design, labels=labels, theta0=theta0, sigma0=sigma0)

    @staticmethod
    def _check_theta(theta: np.ndarray, inst: FiniteInstance) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.shape[0] != inst.p:
            raise InvalidArgumentError(f"theta must have length {inst.p}, got shape {theta.shape}")
        return theta

    @staticmethod
    def adversarial_loss(theta: np.ndarray, inst: FiniteInstance, eps: float) -> float:
        """
        (1 / 2n) sum_i (|y_i - <x_i, theta>| + eps ||theta||)^2.

        Raises:
            InvalidArgumentError: On dimension mismatch or negative eps
        """
        theta = SimulationService._check_theta(theta, inst)
        Validator.validate_nonnegative("eps", eps)
        residual = inst.labels - inst.design @ theta
        margin = np.abs(residual) + eps * np.linalg.norm(theta)
        return float(margin @ margin) / (2.0 * inst.n)

    @staticmethod
    def minmax_objective(theta: np.ndarray, perturbations: np.ndarray, inst: FiniteInstance) -> float:
        """(1 / 2n) sum_i (y_i - <x_i + d_i, theta>)^2 for explicit perturbations d_i."""
        theta = SimulationService._check_theta(theta, inst)
        perturbations = np.asarray(perturbations, dtype=float)
        if perturbations.shape != inst.design.shape:
            raise InvalidArgumentError(
                f"perturbations must have shape {inst.design.shape}, got {perturbations.shape}"
            )
        residual = inst.labels - (inst.design + perturbations) @ theta
        return float(residual @ residual) / (2.0 * inst.n)

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    @staticmethod
    def _smoothed_value(theta: np.ndarray, inst: FiniteInstance, eps: float, mu: float) -> float:
        r = inst.labels - inst.design @ theta
        q = np.sqrt(r * r + mu * mu) + eps * math.sqrt(float(theta @ theta) + mu * mu)
        return float(q @ q) / (2.0 * inst.n)

    @staticmethod
    def _smoothed(theta: np.ndarray, inst: FiniteInstance, eps: float, mu: float):
        """Value, gradient and Hessian of the loss with |r| and ||theta|| smoothed at width mu."""
        x = inst.design
        n = inst.n
        r = inst.labels - x @ theta
        phi = np.sqrt(r * r + mu * mu)
        psi = math.sqrt(float(theta @ theta) + mu * mu)
        q = phi + eps * psi
        value = float(q @ q) / (2.0 * n)

        dphi = r / phi
        ddphi = mu * mu / phi ** 3
        total = float(q.sum())
        grad = (-x.T @ (q * dphi) + eps * total * theta / psi) / n

        b = x.T @ dphi
        hess = (x.T * (dphi * dphi + q * ddphi)) @ x
        hess -= (eps / psi) * (np.outer(b, theta) + np.outer(theta, b))
        hess += n * eps * eps * np.outer(theta, theta) / psi ** 2
        hess += eps * total * (np.eye(len(theta)) / psi - np.outer(theta, theta) / psi ** 3)
        return value, grad, hess / n

    @staticmethod
    def _newton_step(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
        try:
            factor = linalg.cho_factor(hess, check_finite=False)
            return -linalg.cho_solve(factor, grad, check_finite=False)
        except linalg.LinAlgError:
            return -np.linalg.lstsq(hess, grad, rcond=None)[0]

    def subgradient_norm(self, theta: np.ndarray, inst: FiniteInstance, eps: float, mu: float = 0.0) -> float:
        """
        Norm of a small subgradient of the adversarial loss at theta.

        Residuals within the kink width of zero may use any sign in [-1, 1];
        the sign pattern implied by smoothing at width mu is tried first, then
        the minimum-norm choice by bounded least squares.
        """
        theta = self._check_theta(theta, inst)
        x, n = inst.design, inst.n
        r = inst.labels - x @ theta
        u = float(np.linalg.norm(theta))

        if eps == 0:
            return float(np.linalg.norm(x.T @ r)) / n
        if u == 0:
            pull = float(np.linalg.norm(x.T @ r)) / n
            return max(pull - eps * float(np.abs(r).sum()) / n, 0.0)

        c = eps * u
        kink = np.abs(r) <= _KINK_WIDTH * mu
        signs = np.sign(r)
        if mu > 0 and kink.any():
            phi = np.sqrt(r * r + mu * mu)
            q = phi + eps * math.sqrt(u * u + mu * mu)
            signs[kink] = np.clip((q[kink] * r[kink] / phi[kink] - r[kink]) / c, -1.0, 1.0)

        shrink_term = eps * (float(np.abs(r).sum()) / u + n * eps) * theta
        v = (-x.T @ (r + c * signs) + shrink_term) / n
        norm = float(np.linalg.norm(v))
        if not kink.any():
            return norm

        base = v + (c / n) * (x[kink].T @ signs[kink])
        fit = optimize.lsq_linear((c / n) * x[kink].T, base, bounds=(-1.0, 1.0), method="bvls")
        return min(norm, float(np.linalg.norm(base - (c / n) * x[kink].T @ fit.x)))

    def train_adversarial(
        self, inst: FiniteInstance, eps: float, tol: float = None, max_iter: int = None
    ) -> TrainReport:
        """
        Minimize the adversarial loss.

        The loss is convex but kinked where residuals or theta vanish. A
        sequence of smoothed problems of decreasing width is solved by Newton's
        method from theta = 0; the best iterate so far is kept, so the loss
        trace never increases.

        Args:
            inst: Training data
            eps: Training budget
            tol: Stop when the subgradient norm is below tol (1 + loss)
            max_iter: Newton iteration budget

        Returns:
            TrainReport of the certified minimizer

        Raises:
            ConvergenceError: With the partial report if the budget runs out
        """
        Validator.validate_nonnegative("eps", eps)
        tol = self.tol if tol is None else Validator.validate_positive("tol", tol)
        max_iter = self.max_iter if max_iter is None else max_iter

        theta = np.zeros(inst.p)
        best_theta, best_loss = theta, self.adversarial_loss(theta, inst, eps)
        trace = [best_loss]

        if eps == 0:
            theta = np.linalg.lstsq(inst.design, inst.labels, rcond=None)[0]
            loss = self.adversarial_loss(theta, inst, 0.0)
            if loss <= best_loss:
                best_theta, best_loss = theta, loss
            trace.append(best_loss)
            grad_norm = self.subgradient_norm(best_theta, inst, 0.0)
            report = TrainReport(best_theta, best_loss, 1, grad_norm, trace)
            if grad_norm > tol * (1.0 + best_loss):
                raise ConvergenceError("least squares fit failed the gradient check", grad_norm, report)
            return report

        grad_norm = self.subgradient_norm(best_theta, inst, eps)
        if grad_norm <= tol * (1.0 + best_loss):
            return TrainReport(best_theta, best_loss, 0, grad_norm, trace)

        width = 0.1 * max(1.0, float(np.max(np.abs(inst.labels))))
        # sign freedom is only granted to residuals far below the data scale
        kink_cap = 1e-6 * width
        iterations = 0
        for level in range(_LEVELS):
            mu = width * 10.0 ** (-level)
            value, grad, hess = self._smoothed(theta, inst, eps, mu)
            for _ in range(_NEWTON_PER_LEVEL):
                if iterations >= max_iter:
                    break
                if np.linalg.norm(grad) <= 1e-3 * tol * (1.0 + value):
                    break
                step = self._newton_step(hess, grad)
                slope = float(grad @ step)
                if slope >= 0:
                    step, slope = -grad, -float(grad @ grad)
                t = 1.0
                while t > 1e-12:
                    trial = theta + t * step
                    t_value = self._smoothed_value(trial, inst, eps, mu)
                    if t_value <= value + _ARMIJO * t * slope:
                        break
                    t *= 0.5
                else:
                    break
                theta = trial
                value, grad, hess = self._smoothed(theta, inst, eps, mu)
                iterations += 1

                loss = self.adversarial_loss(theta, inst, eps)
                if loss <= best_loss:
                    best_theta, best_loss = theta, loss
                trace.append(best_loss)

            kink_mu = mu if _KINK_WIDTH * mu <= kink_cap else 0.0
            grad_norm = self.subgradient_norm(best_theta, inst, eps, kink_mu)
            logger.debug(f"smoothing level {level} (width {mu:.1e}): loss={best_loss:.15g} subgradient={grad_norm:.3e}")
            if grad_norm <= tol * (1.0 + best_loss):
                return TrainReport(best_theta, best_loss, iterations, grad_norm, trace)
            if iterations >= max_iter:
                break

        report = TrainReport(best_theta, best_loss, iterations, grad_norm, trace)
        raise ConvergenceError(
            f"adversarial training stopped at subgradient norm {grad_norm:.3e}",
            residual=grad_norm,
            report=report,
            context={"eps": eps},
        )

    # ------------------------------------------------------------------
    # Risks
    # ------------------------------------------------------------------

    @staticmethod
    def empirical_risk_point(inst: FiniteInstance, theta_hat: np.ndarray, cfg: AsymptoticConfig) -> RiskPoint:
        """Exact (SR, AR) of theta_hat on the test distribution of inst."""
        sr = RiskService.standard_risk(theta_hat, inst.theta0, inst.sigma0, inst.p)
        ar = RiskService.adversarial_risk(theta_hat, inst.theta0, inst.sigma0, inst.p, cfg.eps_test)
        return RiskPoint(sr, ar, RiskSource.EMPIRICAL, cfg.eps_train, KnobKind.EPSILON)

    def replicate(self, n: int, p: int, cfg: AsymptoticConfig, eps: float, rng: SeededRng) -> Tuple[float, float, float, float]:
        """One replicate: (||theta_hat - theta0||^2 / p, ||theta_hat||^2 / p, SR, AR)."""
        inst = self.generate_instance(n, p, cfg, rng)
        report = self.train_adversarial(inst, eps)
        point = self.empirical_risk_point(inst, report.theta_hat, cfg.with_(eps_train=eps))
        error = report.theta_hat - inst.theta0
        return (
            float(error @ error) / p,
            float(report.theta_hat @ report.theta_hat) / p,
            point.sr,
            point.ar,
        )

    def run_replicates(
        self,
        n: int,
        p: int,
        cfg: AsymptoticConfig,
        eps: float,
        seeds: int,
        master_seed: int,
        workers: Optional[int] = None,
    ) -> ReplicateSummary:
        """
        Train one estimator per replicate stream.

        Replicate k uses SeededRng(master_seed).spawn(k); results are kept in
        replicate order whatever the worker count.

        Args:
            n, p: Instance size
            cfg: Problem parameters
            eps: Training budget
            seeds: Number of replicates
            master_seed: Experiment seed
            workers: Process count; 1 runs inline

        Returns:
            ReplicateSummary with one entry per replicate
        """
        Validator.validate_count("seeds", seeds)
        workers = 1 if workers is None else workers
        tasks = [(self.tol, self.max_iter, n, p, cfg, eps, master_seed, k) for k in range(seeds)]
        logger.info(f"Running {seeds} replicates at n={n}, p={p}, eps={eps} on {workers} worker(s)")
        if workers > 1 and seeds > 1:
            with Pool(processes=min(workers, seeds)) as pool:
                rows: List[Tuple[float, ...]] = pool.map(_run_replicate, tasks)
        else:
            rows = [_run_replicate(task) for task in tasks]
        values = np.array(rows)
        return ReplicateSummary(
            error_sq=values[:, 0], norm_sq=values[:, 1], sr=values[:, 2], ar=values[:, 3]
        )


def _run_replicate(task: tuple) -> Tuple[float, float, float, float]:
    tol, max_iter, n, p, cfg, eps, master_seed, k = task
    service = SimulationService(tol=tol, max_iter=max_iter)
    return service.replicate(n, p, cfg, eps, SeededRng(master_seed).spawn(k))
