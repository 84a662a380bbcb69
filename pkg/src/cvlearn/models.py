"""Enums and pydantic result models shared across cvlearn modules."""

from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class DemandKind(str, Enum):
    """Parametric mean-demand families."""

    LINEAR = "linear"
    MNL = "mnl"


class NoiseKind(str, Enum):
    """Demand shock distributions."""

    BOUNDED_UNIFORM = "bounded_uniform"
    GAUSSIAN = "gaussian"


class DesignKind(str, Enum):
    """Families of joint experimentation laws over {0,1}^n."""

    INDEPENDENT = "independent"
    COMMON_SHOCK_MIXTURE = "common_shock_mixture"
    EXPLICIT_TABLE = "explicit_table"


class JacobianMethod(str, Enum):
    """How the Jacobian of the target map is evaluated."""

    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite_difference"


class BatchScheduleKind(str, Enum):
    """Batch length schedules."""

    GEOMETRIC = "geometric"
    EXPLICIT = "explicit"


class DeltaScheduleKind(str, Enum):
    """Perturbation size schedules.

    ``LOG_QUARTIC`` is ``delta_k = (log(e * I_k) / I_k) ** (1/4)``, the schedule
    that attains the ``T ** -1/2`` mean-squared error rate.
    """

    LOG_QUARTIC = "log_quartic"
    POWER_LAW = "power_law"
    EXPLICIT = "explicit"


class TargetKind(str, Enum):
    """Equilibrium that simulated prices are compared against."""

    NASH = "nash"
    CV_FROM_DESIGN = "cv_from_design"
    EXPLICIT = "explicit"


class OutputFormat(str, Enum):
    """Tabular artifact formats."""

    CSV = "csv"
    JSON = "json"


class RegularityViolation(BaseModel):
    """A grid point where a demand sign condition fails."""

    model_config = ConfigDict(frozen=True)

    kind: str
    seller: int
    partner: int | None = None
    price: list[float]
    value: float


class DemandBounds(BaseModel):
    """Grid estimates of the demand regularity constants.

    ``m0`` and ``m1`` lower-bound demand levels and own-price slopes, ``M1`` and
    ``M2`` upper-bound first and second derivatives in absolute value. ``M1`` runs
    over all ``(i, j)`` pairs, own effects included.
    """

    model_config = ConfigDict(frozen=True)

    m0: float
    m1: float
    M1: float
    M2: float
    grid_resolution: int
    points: int
    violation_count: int = 0
    violations: list[RegularityViolation] = Field(default_factory=list)

    @property
    def regular(self) -> bool:
        """True when every scanned point satisfies the sign conditions."""
        return self.violation_count == 0


class FixedPointResult(BaseModel):
    """Outcome of iterating the damped update map to a fixed point."""

    model_config = ConfigDict(frozen=True)

    price: list[float]
    iterations: int
    residual_map: float
    residual_foc: list[float]
    boundary_flags: list[bool]
    certified_interior: bool
    optimality_certified: bool = False
    converged: bool = True

    @property
    def price_array(self) -> np.ndarray:
        return np.asarray(self.price, dtype=float)

    @property
    def max_abs_foc(self) -> float:
        return float(np.max(np.abs(self.residual_foc))) if self.residual_foc else 0.0


class ClosedFormSolution(BaseModel):
    """Direct solution of the linear-demand first-order system."""

    model_config = ConfigDict(frozen=True)

    price: list[float]
    inside_box: bool
    condition_number: float

    @property
    def price_array(self) -> np.ndarray:
        return np.asarray(self.price, dtype=float)


class ContractionReport(BaseModel):
    """Contraction diagnostics of the target map over a price box.

    ``norm_sup`` is the largest sampled ``||Dz||_inf``. ``gamma`` is the
    contraction modulus of the damped update map. ``L_comp``/``L_curv`` split the
    Jacobian at ``query_point`` into competition and curvature parts; they are
    only populated for the zero conjecture matrix.
    """

    model_config = ConfigDict(frozen=True)

    norm_sup: float
    gamma: float
    satisfied: bool
    slope_positive: bool
    min_beta: float
    points: int
    query_point: list[float]
    jacobian: list[list[float]] | None = None
    L_comp: list[list[float]] | None = None
    L_curv: list[list[float]] | None = None
    sufficient_linear: bool | None = None
    sufficient_mnl: bool | None = None
    max_share: float | None = None

    def verdict(self) -> str:
        """One-line human readable contraction verdict."""
        sign = "<" if self.satisfied else ">="
        return f"‖Dz‖∞ = {self.norm_sup:.6g} {sign} 1"


class RateFit(BaseModel):
    """Log-log regression of mean squared error against cumulative periods."""

    model_config = ConfigDict(frozen=True)

    T: list[float]
    mse: list[float]
    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    window: tuple[int, int]
    resamples: int
    confidence: float
