"""Domain types shared by the services."""
import math
import numbers
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from exceptions import InvalidArgumentError


class RiskSource(str, Enum):
    """Where a risk point came from."""
    PARETO_THEORY = "pareto_theory"
    SADDLE_THEORY = "saddle_theory"
    EMPIRICAL = "empirical"


class KnobKind(str, Enum):
    """Which scalar generated a risk point."""
    LAMBDA = "lambda"
    EPSILON = "epsilon"


@dataclass(frozen=True)
class AsymptoticConfig:
    """
    Limiting problem parameters.

    Attributes:
        delta: Sample ratio n/p
        sigma: Normalized noise level, limit of sigma0 / sqrt(p)
        v_norm: Signal strength V, limit of ||theta0|| / sqrt(p)
        eps_train: Training adversary budget
        eps_test: Test adversary budget
    """
    delta: float
    sigma: float
    v_norm: float
    eps_train: float = 0.0
    eps_test: float = 0.0

    def __post_init__(self):
        for name in ("delta", "sigma", "v_norm", "eps_train", "eps_test"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.delta <= 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")
        for name in ("sigma", "v_norm", "eps_train", "eps_test"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative, got {getattr(self, name)}")

    @property
    def has_asymptotic_prediction(self) -> bool:
        """True when the saddle characterization applies."""
        return self.eps_train > 0 or self.delta > 1

    def with_(self, **changes: float) -> "AsymptoticConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AsymptoticConfig":
        return cls(**{k: data[k] for k in ("delta", "sigma", "v_norm", "eps_train", "eps_test")})


@dataclass(frozen=True)
class FiniteInstance:
    """A concrete regression dataset y = X theta0 + w."""
    design: np.ndarray
    labels: np.ndarray
    theta0: np.ndarray
    sigma0: float

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class RiskPoint:
    sr: float
    ar: float
    source: RiskSource
    knob: float
    knob_kind: KnobKind

    def dominates(self, other: "RiskPoint") -> bool:
        """Weak Pareto dominance with lower-is-better in both risks."""
        return (
            self.sr <= other.sr
            and self.ar <= other.ar
            and (self.sr < other.sr or self.ar < other.ar)
        )


@dataclass(frozen=True)
class ParetoSolution:
    lam: float
    gamma0: float
    a_lambda: float
    sr: float
    ar: float
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class SaddleSolution:
    """Saddle point of the scalar auxiliary objective."""
    alpha: float
    beta: float
    gamma: float
    tau_h: float
    tau_g: float
    tau_star: float
    d_value: float
    stationarity: float
    iterations: int = 0
    closed_form: bool = False

    def as_vector(self) -> np.ndarray:
        return np.array([self.alpha, self.tau_g, self.beta, self.gamma, self.tau_h])


@dataclass
class TrainReport:
    theta_hat: np.ndarray
    final_loss: float
    iterations: int
    grad_norm: float
    loss_trace: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class ReplicateSummary:
    """Per-replicate measurements from a Monte Carlo batch."""
    error_sq: np.ndarray
    norm_sq: np.ndarray
    sr: np.ndarray
    ar: np.ndarray

    @property
    def n_seeds(self) -> int:
        return len(self.sr)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    sr_theory: Optional[float]
    ar_theory: Optional[float]
    sr_empirical: Optional[float] = None
    ar_empirical: Optional[float] = None
    n_seeds: Optional[int] = None
    stderr_sr: Optional[float] = None
    stderr_ar: Optional[float] = None

    @property
    def has_empirical(self) -> bool:
        return self.sr_empirical is not None


THEORY_COLUMNS = ("axis_value", "sr_theory", "ar_theory")
EMPIRICAL_COLUMNS = ("sr_empirical", "ar_empirical", "n_seeds", "stderr_sr", "stderr_ar")


@dataclass
class SweepTable:
    """
    A grid of risk values with serialization metadata.

    Attributes:
        schema_version: Table format version
        config: Fixed parameters of the curve
        axis_name: Name of the swept quantity
        rows: Rows sorted by axis value
        provenance: Master seed, timestamp and tool version
        skipped: Axis values dropped from the grid (poles)
        label: Short name of the curve within a multi-curve command
    """
    schema_version: str
    config: AsymptoticConfig
    axis_name: str
    rows: List[SweepRow]
    provenance: Dict[str, Any]
    skipped: List[float] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.axis_value)
        axis = [r.axis_value for r in self.rows]
        if len(set(axis)) != len(axis):
            raise InvalidArgumentError(f"duplicate {self.axis_name} values in table {self.label!r}")
        flags = {r.has_empirical for r in self.rows}
        if len(flags) > 1:
            raise InvalidArgumentError("empirical columns must be present in every row or none")

    @property
    def has_empirical(self) -> bool:
        return bool(self.rows) and self.rows[0].has_empirical

    @property
    def columns(self) -> tuple:
        return THEORY_COLUMNS + (EMPIRICAL_COLUMNS if self.has_empirical else ())

    def axis(self) -> np.ndarray:
        return np.array([r.axis_value for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


@dataclass(frozen=True)
class CriterionResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    budget: str
    results: List[CriterionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed_names(self) -> List[str]:
        return [r.name for r in self.results if not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "budget": self.budget,
            "passed": self.passed,
            "criteria": [asdict(r) for r in self.results],
        }
