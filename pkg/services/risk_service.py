"""Exact finite-dimensional standard and adversarial risks."""
import math

import numpy as np

from logger import setup_logger
from utils.validator import Validator

logger = setup_logger(__name__)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class RiskService:
    """
    Risk of a linear predictor on Gaussian test data.

    With x ~ N(0, I_p) and noise of variance sigma0^2, the squared error of
    theta_hat and its worst case over an l2 ball of radius eps_test have
    closed forms in ||theta_hat - theta0|| and ||theta_hat||.
    """

    @staticmethod
    def standard_risk(theta_hat: np.ndarray, theta0: np.ndarray, sigma0: float, p: int) -> float:
        """
        Standard risk normalized by p.

        Args:
            theta_hat: Estimate
            theta0: True parameter
            sigma0: Per-sample noise standard deviation
            p: Normalization dimension

        Returns:
            (sigma0^2 + ||theta_hat - theta0||^2) / p

        Raises:
            InvalidArgumentError: On dimension mismatch or invalid scalars
        """
        theta_hat, theta0 = Validator.validate_vector_pair(theta_hat, theta0)
        Validator.validate_count("p", p)
        Validator.validate_nonnegative("sigma0", sigma0)
        error = theta_hat - theta0
        return (sigma0 ** 2 + float(error @ error)) / p

    @staticmethod
    def adversarial_risk(
        theta_hat: np.ndarray,
        theta0: np.ndarray,
        sigma0: float,
        p: int,
        eps_test: float,
    ) -> float:
        """
        Adversarial risk normalized by p.

        The worst perturbation of norm eps_test adds eps_test * ||theta_hat||
        to the absolute residual; averaging the square over the Gaussian
        residual gives the closed form below.

        Args:
            theta_hat: Estimate
            theta0: True parameter
            sigma0: Per-sample noise standard deviation
            p: Normalization dimension
            eps_test: Test-time perturbation budget

        Returns:
            Adversarial risk; equals standard_risk when eps_test = 0

        Raises:
            InvalidArgumentError: On dimension mismatch or invalid scalars
        """
        theta_hat, theta0 = Validator.validate_vector_pair(theta_hat, theta0)
        Validator.validate_count("p", p)
        Validator.validate_nonnegative("sigma0", sigma0)
        Validator.validate_nonnegative("eps_test", eps_test)

        error = theta_hat - theta0
        residual_var = sigma0 ** 2 + float(error @ error)
        if eps_test == 0:
            return residual_var / p

        norm = float(np.linalg.norm(theta_hat))
        return (
            (residual_var + eps_test ** 2 * norm ** 2) / p
            + 2.0 * SQRT_2_OVER_PI * (eps_test / math.sqrt(p)) * norm * math.sqrt(residual_var / p)
        )

    @staticmethod
    def worst_case_perturbation(x: np.ndarray, y: float, theta: np.ndarray, eps: float) -> np.ndarray:
        """
        Loss-maximizing feature perturbation within the eps ball.

        Args:
            x: Feature vector
            y: Label
            theta: Model parameter
            eps: Perturbation budget

        Returns:
            -eps * sign(y - <x, theta>) * theta / ||theta||; the zero vector
            when theta = 0 or the residual is exactly zero
        """
        x, theta = Validator.validate_vector_pair(x, theta)
        Validator.validate_nonnegative("eps", eps)

        norm = float(np.linalg.norm(theta))
        residual = float(y) - float(x @ theta)
        if norm == 0.0 or residual == 0.0:
            return np.zeros_like(theta)
        return -eps * math.copysign(1.0, residual) * theta / norm
