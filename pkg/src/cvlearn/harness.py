"""Monte Carlo orchestration: replications, rate fits and correlation sweeps."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import polars as pl
from joblib import Parallel, delayed
from numpy.typing import ArrayLike

from cvlearn.demand import DemandSystem, NoiseSpec
from cvlearn.design import (
    DesignSchedule,
    DesignValidationError,
    UndefinedConditionalError,
    build_design,
    conjecture_matrix,
)
from cvlearn.equilibrium import (
    AssumptionViolationError,
    ContractionError,
    NonConvergenceError,
    SingularSystemError,
    SolverConfig,
    solve_cv_equilibrium,
)
from cvlearn.models import DesignKind, FixedPointResult, RateFit, TargetKind
from cvlearn.sldl import SldlConfig, SldlConfigError, replication_rng, run_sldl

logger = logging.getLogger(__name__)

DEFAULT_TAIL_FRACTION = 0.5
DEFAULT_BOOTSTRAP_RESAMPLES = 1000
DEFAULT_CONFIDENCE = 0.95
MIN_RATE_POINTS = 4
QUANTILES = (0.1, 0.5, 0.9)


class TargetResolutionError(RuntimeError):
    """Raised when the equilibrium a plan compares against cannot be solved.

    Attributes
    ----------
    result : FixedPointResult | None
        Last solver iterate when the solver got that far.
    """

    def __init__(self, message: str, result: FixedPointResult | None = None):
        super().__init__(message)
        self.result = result


class InsufficientPointsError(ValueError):
    """Raised when a rate fit window holds fewer than four batches."""


@dataclass
class ExperimentPlan:
    """Everything a replication set needs.

    Attributes
    ----------
    demand : DemandSystem
        True market.
    noise : NoiseSpec | None
        Demand shocks, ``None`` for noiseless runs.
    design : DesignSchedule
        Experimentation laws; ``design.target`` is the declared limit law.
    sldl : SldlConfig
        Learning configuration. Its seed is the plan seed.
    replications : int
        Number of independent runs (default: 1).
    target : TargetKind
        Equilibrium to measure errors against.
    target_price : np.ndarray | None
        Required for ``TargetKind.EXPLICIT``.
    n_jobs : int
        Parallel workers for replications (default: 1).
    solver : SolverConfig | None
        Settings for resolving the target.
    """

    demand: DemandSystem
    noise: NoiseSpec | None
    design: DesignSchedule
    sldl: SldlConfig
    replications: int = 1
    target: TargetKind = TargetKind.NASH
    target_price: np.ndarray | None = None
    n_jobs: int = 1
    solver: SolverConfig | None = None

    def __post_init__(self) -> None:
        self.target = TargetKind(self.target)
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")

    @property
    def seed(self) -> int:
        return self.sldl.seed


def resolve_target(plan: ExperimentPlan) -> tuple[np.ndarray, FixedPointResult | None]:
    """Solve the equilibrium a plan's errors are measured against.

    Returns
    -------
    tuple[np.ndarray, FixedPointResult | None]
        The target price and, for solved targets, the solver result.

    Raises
    ------
    TargetResolutionError
        If the solver fails or an explicit target is missing or outside the box.
    """
    d = plan.demand
    if plan.target is TargetKind.EXPLICIT:
        if plan.target_price is None:
            raise TargetResolutionError("explicit target requires target_price")
        price = np.asarray(plan.target_price, dtype=float)
        if price.shape != (d.n,) or not d.box.contains(price):
            raise TargetResolutionError(f"explicit target {price.tolist()} is not a price in the box")
        return price, None

    A = None if plan.target is TargetKind.NASH else conjecture_matrix(plan.design.target)
    u = plan.sldl.rates(d.n)
    try:
        result = solve_cv_equilibrium(d, A, u, d.box, config=plan.solver)
    except NonConvergenceError as e:
        raise TargetResolutionError(f"target equilibrium did not converge: {e}", e.result) from e
    except (ContractionError, AssumptionViolationError, SingularSystemError) as e:
        raise TargetResolutionError(f"target equilibrium could not be solved: {e}") from e
    logger.info("Target %s equilibrium: %s", plan.target.value, result.price)
    return result.price_array, result


@dataclass
class ReplicationStats:
    """Per-batch error statistics over replications.

    Attributes
    ----------
    T : np.ndarray
        Cumulative periods at each batch end, shape ``(K,)``.
    errors : np.ndarray
        ``||p_hat - p*||_inf`` per replication and batch, shape ``(R, K)``.
    target : np.ndarray | None
        Equilibrium the errors are measured against.
    final_prices : np.ndarray | None
        Last baseline of every replication, shape ``(R, n)``.
    truncated_last : bool
        Whether the final batch was shortened by a horizon.
    """

    T: np.ndarray
    errors: np.ndarray
    target: np.ndarray | None = None
    final_prices: np.ndarray | None = None
    truncated_last: bool = False

    @classmethod
    def from_errors(cls, T: ArrayLike, errors: ArrayLike, **kwargs: Any) -> ReplicationStats:
        """Build statistics from raw errors, e.g. synthetic curves."""
        errs = np.atleast_2d(np.asarray(errors, dtype=float))
        return cls(T=np.asarray(T, dtype=float), errors=errs, **kwargs)

    @property
    def replications(self) -> int:
        return int(self.errors.shape[0])

    @property
    def batches(self) -> int:
        return int(self.errors.shape[1])

    @property
    def mean_err(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def var_err(self) -> np.ndarray:
        return self.errors.var(axis=0)

    @property
    def mean_sq_err(self) -> np.ndarray:
        return (self.errors**2).mean(axis=0)

    def quantiles(self, q: Sequence[float] = QUANTILES) -> np.ndarray:
        return np.quantile(self.errors, q, axis=0)

    def to_frame(self) -> pl.DataFrame:
        q10, q50, q90 = self.quantiles()
        return pl.DataFrame(
            {
                "batch": np.arange(1, self.batches + 1),
                "T": self.T,
                "mean_err": self.mean_err,
                "var_err": self.var_err,
                "mean_sq_err": self.mean_sq_err,
                "q10": q10,
                "q50": q50,
                "q90": q90,
            }
        )


def _run_one(plan: ExperimentPlan, index: int, target: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = replication_rng(plan.seed, index)
    trace = run_sldl(plan.sldl, plan.demand, plan.noise, plan.design, rng=rng, run_id=index)
    return trace.errors(target), trace.cumulative_periods(), trace.final_price


def run_replications(plan: ExperimentPlan, *, target: np.ndarray | None = None) -> ReplicationStats:
    """Run ``plan.replications`` independent learning runs.

    Replication ``r`` draws from ``SeedSequence(seed, spawn_key=(r,))``, so
    results do not depend on ``n_jobs`` and come back in replication order.

    Raises
    ------
    TargetResolutionError
        If the target equilibrium cannot be solved. Nothing is simulated then.
    """
    if target is None:
        target, _ = resolve_target(plan)
    plan.sldl.validate(plan.demand.box)
    logger.info("Running %d replications with n_jobs=%d", plan.replications, plan.n_jobs)
    outputs = Parallel(n_jobs=plan.n_jobs, backend="loky")(
        delayed(_run_one)(plan, r, target) for r in range(plan.replications)
    )
    errors = np.vstack([o[0] for o in outputs])
    T = outputs[0][1].astype(float)
    finals = np.vstack([o[2] for o in outputs])
    stats = ReplicationStats(
        T=T,
        errors=errors,
        target=np.asarray(target, dtype=float),
        final_prices=finals,
        truncated_last=plan.sldl.batch_schedule.truncated,
    )
    logger.info("Finished %d replications; final mean error %.4g", plan.replications, stats.mean_err[-1])
    return stats


def _slope(log_t: np.ndarray, sq_errors: np.ndarray) -> tuple[float, float]:
    mse = sq_errors.mean(axis=0)
    if np.any(mse <= 0):
        raise ValueError("mean squared error must be positive to take logs")
    slope, intercept = np.polyfit(log_t, np.log(mse), 1)
    return float(slope), float(intercept)


def fit_rate(
    stats: ReplicationStats,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    *,
    resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
) -> RateFit:
    """Regress ``log mse`` on ``log T`` over the tail of the batches.

    The window is the last ``tail_fraction`` of the batches, leaving out a
    horizon-truncated final batch. The confidence interval is a percentile
    bootstrap over replications.

    Raises
    ------
    InsufficientPointsError
        If the window holds fewer than four batches.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    end = stats.batches - 1 if stats.truncated_last else stats.batches
    start = end - math.ceil(tail_fraction * end)
    if end - start < MIN_RATE_POINTS:
        raise InsufficientPointsError(f"rate fit needs >= {MIN_RATE_POINTS} points, window has {end - start}")

    log_t = np.log(stats.T[start:end])
    sq = stats.errors[:, start:end] ** 2
    slope, intercept = _slope(log_t, sq)

    rng = np.random.default_rng(seed)
    draws = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, stats.replications, stats.replications)
        draws[b] = _slope(log_t, sq[idx])[0]
    alpha = (1.0 - confidence) / 2.0
    low, high = np.quantile(draws, [alpha, 1.0 - alpha])

    mse = sq.mean(axis=0)
    logger.info("Rate fit over batches %d..%d: slope %.4f [%.4f, %.4f]", start + 1, end, slope, low, high)
    return RateFit(
        T=stats.T[start:end].tolist(),
        mse=mse.tolist(),
        slope=slope,
        intercept=intercept,
        slope_ci=(float(low), float(high)),
        window=(start + 1, end),
        resamples=resamples,
        confidence=confidence,
    )


@dataclass
class CorrelationSweep:
    """Limit and simulated prices across experimentation correlations."""

    frame: pl.DataFrame
    monotone: bool | None = None
    failures: dict[float, str] = field(default_factory=dict)


def correlation_sweep(
    plan: ExperimentPlan,
    rho_values: Sequence[float],
    *,
    q: float = 0.5,
    simulate: bool = True,
) -> CorrelationSweep:
    """Sweep the common-shock mixture correlation ``rho``.

    For each ``rho`` the induced conjecture is computed from the design, the
    CV equilibrium it selects is solved and, with ``simulate``, the plan's
    replications are rerun under that design. Failures are recorded per row.
    """
    n = plan.demand.n
    rows: list[dict[str, Any]] = []
    failures: dict[float, str] = {}
    limits: list[np.ndarray] = []
    for rho in rho_values:
        row: dict[str, Any] = {"rho": float(rho), "a_star": None}
        row.update({f"limit_{i + 1}": None for i in range(n)})
        if simulate:
            row.update({f"simulated_{i + 1}": None for i in range(n)})
            row["gap"] = None
        try:
            design = build_design(DesignKind.COMMON_SHOCK_MIXTURE, n=n, rho=float(rho), q=q)
            A = conjecture_matrix(design)
            row["a_star"] = float(A.entries[0, 1]) if n > 1 else 0.0
            sub = replace(plan, design=DesignSchedule.constant(design), target=TargetKind.CV_FROM_DESIGN)
            limit, _ = resolve_target(sub)
            limits.append(limit)
            for i in range(n):
                row[f"limit_{i + 1}"] = float(limit[i])
            if simulate:
                stats = run_replications(sub, target=limit)
                assert stats.final_prices is not None
                mean_final = stats.final_prices.mean(axis=0)
                for i in range(n):
                    row[f"simulated_{i + 1}"] = float(mean_final[i])
                row["gap"] = float(np.max(np.abs(mean_final - limit)))
            row["error"] = None
        except (DesignValidationError, UndefinedConditionalError, TargetResolutionError, SldlConfigError) as e:
            logger.warning("Sweep at rho=%s failed: %s", rho, e)
            failures[float(rho)] = str(e)
            row["error"] = str(e)
        rows.append(row)

    monotone = None
    if limits and not failures:
        monotone = bool(np.all(np.diff(np.vstack(limits), axis=0) >= -1e-9))
    return CorrelationSweep(frame=pl.DataFrame(rows), monotone=monotone, failures=failures)
