"""Custom exceptions for the robustness tradeoff toolkit."""
from typing import Any, Optional


class TradeoffError(Exception):
    """Base exception for the toolkit."""
    pass


class InvalidArgumentError(TradeoffError):
    """Raised when arguments have wrong shape, sign or type."""
    pass


class DomainError(TradeoffError):
    """Raised when a formula is evaluated outside its region of validity."""
    pass


class ConvergenceError(TradeoffError):
    """Raised when an iterative solver exhausts its budget."""

    def __init__(
        self,
        message: str,
        residual: float = float("nan"),
        report: Optional[Any] = None,
        context: Optional[dict] = None,
    ):
        super().__init__(message)
        self.residual = residual
        self.report = report
        self.context = dict(context or {})

    def annotate(self, **context: Any) -> "ConvergenceError":
        """Attach the sweep coordinates that produced the failure."""
        self.context.update(context)
        return self

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        where = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
        return f"{base} [{where}]"


class BoxTooSmallError(ConvergenceError):
    """Raised when the saddle point touches an artificial box bound."""
    pass


class RootMultiplicityError(TradeoffError):
    """Raised when a fixed-point defect changes sign more than once."""
    pass


class InternalConsistencyError(TradeoffError):
    """Raised when a guarded impossible state is reached."""
    pass


class ValidationError(TradeoffError):
    """Raised when command-line input fails validation."""
    pass
