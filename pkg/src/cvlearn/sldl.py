"""Switchback linear demand learning.

Each seller holds a baseline price per batch and, in periods where the joint
experimentation draw selects it, posts the baseline plus a perturbation. At
the batch end it regresses its own demand on its own price, treats the fit as
a monopoly demand curve and moves part of the way toward the fitted revenue
maximiser, projected onto the next (shrunken) price box.

Examples
--------
>>> from cvlearn.sldl import BatchSchedule, DeltaSchedule, SldlConfig
>>> cfg = SldlConfig(
...     u=0.5,
...     batch_schedule=BatchSchedule.geometric(initial=64, growth=1.5, count=20),
...     delta_schedule=DeltaSchedule.log_quartic(),
... )
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import polars as pl
from numpy.typing import ArrayLike

from cvlearn.demand import DemandSystem, NoiseSpec, PriceBox, as_price, sample_realized_demand
from cvlearn.design import (
    ConjectureMatrix,
    DesignSchedule,
    EmpiricalDesign,
    ExperimentDesign,
    empirical_conjecture,
    empirical_joint,
    sample_periods,
)
from cvlearn.models import BatchScheduleKind, DeltaScheduleKind

logger = logging.getLogger(__name__)

DEFAULT_SLOPE_TOLERANCE = 1e-8
MIN_BATCH_LENGTH = 2


class SldlConfigError(ValueError):
    """Raised when a learning configuration is inconsistent with the price box.

    Attributes
    ----------
    field : str
        Configuration field at fault (``u``, ``initial_price``, ``delta``, ``batches``).
    """

    def __init__(self, message: str, field: str):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True, eq=False)
class BatchSchedule:
    """Batch lengths ``I_1, ..., I_K``.

    Geometric schedules use ``I_k = ceil(I_1 * growth ** (k - 1))``. A
    ``horizon`` caps the total number of periods; the batch crossing it is
    truncated and flagged.
    """

    kind: BatchScheduleKind
    initial: int | None = None
    growth: float | None = None
    count: int | None = None
    explicit: tuple[int, ...] | None = None
    horizon: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BatchScheduleKind(self.kind))
        if self.kind is BatchScheduleKind.GEOMETRIC:
            if self.initial is None or self.growth is None or self.count is None:
                raise SldlConfigError("geometric batches need initial, growth and count", field="batches")
            if self.initial < MIN_BATCH_LENGTH:
                raise SldlConfigError(f"initial batch length must be >= {MIN_BATCH_LENGTH}", field="batches.initial")
            if self.growth <= 1:
                raise SldlConfigError("batch growth factor must exceed 1", field="batches.growth")
            if self.count < 1:
                raise SldlConfigError("batch count must be >= 1", field="batches.count")
        else:
            if not self.explicit:
                raise SldlConfigError("explicit batches need a nonempty length list", field="batches.lengths")
            if min(self.explicit) < MIN_BATCH_LENGTH:
                raise SldlConfigError(f"every batch needs >= {MIN_BATCH_LENGTH} periods", field="batches.lengths")
            object.__setattr__(self, "explicit", tuple(int(x) for x in self.explicit))
        if self.horizon is not None and self.horizon < MIN_BATCH_LENGTH:
            raise SldlConfigError("horizon must allow at least one batch", field="batches.horizon")

    @classmethod
    def geometric(cls, initial: int, growth: float, count: int, horizon: int | None = None) -> BatchSchedule:
        return cls(kind=BatchScheduleKind.GEOMETRIC, initial=initial, growth=growth, count=count, horizon=horizon)

    @classmethod
    def from_lengths(cls, lengths: Sequence[int], horizon: int | None = None) -> BatchSchedule:
        return cls(kind=BatchScheduleKind.EXPLICIT, explicit=tuple(lengths), horizon=horizon)

    def _untruncated(self, count: int) -> np.ndarray:
        if self.kind is BatchScheduleKind.GEOMETRIC:
            assert self.initial is not None and self.growth is not None
            raw = self.initial * self.growth ** np.arange(count)
            # round first so exact products like 64 * 1.5 are not pushed up by representation error
            return np.ceil(np.round(raw, 9)).astype(np.int64)
        assert self.explicit is not None
        values = list(self.explicit[:count])
        values += [self.explicit[-1]] * (count - len(values))
        return np.asarray(values, dtype=np.int64)

    def _nominal_count(self) -> int:
        if self.kind is BatchScheduleKind.GEOMETRIC:
            assert self.count is not None
            return self.count
        assert self.explicit is not None
        return len(self.explicit)

    def lengths(self) -> np.ndarray:
        """Batch lengths after horizon truncation."""
        lengths = self._untruncated(self._nominal_count())
        if self.horizon is None:
            return lengths
        ends = np.cumsum(lengths)
        keep = int(np.searchsorted(ends, self.horizon, side="left")) + 1
        lengths = lengths[:keep].copy()
        overshoot = int(lengths.sum()) - self.horizon
        if overshoot > 0:
            lengths[-1] -= overshoot
            if lengths[-1] < MIN_BATCH_LENGTH:
                lengths = lengths[:-1]
        return lengths

    @property
    def truncated(self) -> bool:
        """Whether the last batch was shortened by the horizon."""
        if self.horizon is None:
            return False
        lengths = self.lengths()
        return int(lengths[-1]) != int(self._untruncated(len(lengths))[-1])

    def lookahead(self) -> int:
        """Length the batch after the last one would have."""
        count = len(self.lengths())
        return int(self._untruncated(count + 1)[-1])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "initial": self.initial,
            "growth": self.growth,
            "count": self.count,
            "lengths": self.lengths().tolist(),
            "horizon": self.horizon,
            "truncated": self.truncated,
        }


@dataclass(frozen=True, eq=False)
class DeltaSchedule:
    """Perturbation sizes ``delta_k`` per batch and seller.

    ``log_quartic`` is ``scale * (log(e * I_k) / I_k) ** 0.25``; ``power_law``
    is ``scale * k ** -exponent``; ``explicit`` lists values per batch, either
    one shared value or one per seller.
    """

    kind: DeltaScheduleKind
    scale: float = 1.0
    exponent: float | None = None
    explicit: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DeltaScheduleKind(self.kind))
        if self.scale <= 0:
            raise SldlConfigError("delta scale must be > 0", field="delta.scale")
        if self.kind is DeltaScheduleKind.POWER_LAW and (self.exponent is None or self.exponent <= 0):
            raise SldlConfigError("power-law delta needs an exponent > 0", field="delta.exponent")
        if self.kind is DeltaScheduleKind.EXPLICIT:
            if self.explicit is None:
                raise SldlConfigError("explicit delta needs values", field="delta.values")
            values = np.array(self.explicit, dtype=float)
            if values.ndim not in (1, 2) or values.shape[0] == 0 or np.any(values <= 0):
                raise SldlConfigError("explicit delta values must be positive", field="delta.values")
            values.setflags(write=False)
            object.__setattr__(self, "explicit", values)

    @classmethod
    def log_quartic(cls, scale: float = 1.0) -> DeltaSchedule:
        return cls(kind=DeltaScheduleKind.LOG_QUARTIC, scale=scale)

    @classmethod
    def power_law(cls, scale: float, exponent: float) -> DeltaSchedule:
        return cls(kind=DeltaScheduleKind.POWER_LAW, scale=scale, exponent=exponent)

    @classmethod
    def from_values(cls, values: ArrayLike) -> DeltaSchedule:
        return cls(kind=DeltaScheduleKind.EXPLICIT, explicit=np.asarray(values, dtype=float))

    def values(self, lengths: ArrayLike, n: int) -> np.ndarray:
        """Perturbations of shape ``(len(lengths), n)``."""
        lengths = np.asarray(lengths, dtype=float)
        count = lengths.size
        if self.kind is DeltaScheduleKind.LOG_QUARTIC:
            shared = self.scale * (np.log(math.e * lengths) / lengths) ** 0.25
        elif self.kind is DeltaScheduleKind.POWER_LAW:
            assert self.exponent is not None
            shared = self.scale * np.arange(1, count + 1, dtype=float) ** -self.exponent
        else:
            assert self.explicit is not None
            rows = self.explicit
            if rows.shape[0] < count:
                pad = np.repeat(rows[-1:], count - rows.shape[0], axis=0)
                rows = np.concatenate([rows, pad], axis=0)
            rows = rows[:count]
            if rows.ndim == 2:
                if rows.shape[1] != n:
                    raise SldlConfigError(f"explicit delta rows must have {n} entries", field="delta.values")
                return rows.copy()
            shared = rows
        return np.repeat(np.asarray(shared, dtype=float)[:, None], n, axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "scale": self.scale,
            "exponent": self.exponent,
            "values": None if self.explicit is None else self.explicit.tolist(),
        }


def scaling_diagnostic(lengths: ArrayLike, deltas: ArrayLike) -> bool:
    """Check that ``delta_k`` decreases and ``delta_k sqrt(I_k) / log(I_k)`` grows.

    Evaluated over the declared horizon only, so the verdict is numerical
    evidence rather than a statement about the limit.
    """
    lengths = np.asarray(lengths, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if lengths.size < 2:
        return True
    decreasing = bool(np.all(np.diff(deltas, axis=0) <= 1e-15))
    score = deltas * (np.sqrt(lengths) / np.log(lengths))[:, None]
    growing = bool(np.all(score[-1] > score[0]))
    return decreasing and growing


@dataclass
class SldlConfig:
    """Parameters of one learning run.

    Attributes
    ----------
    u : float | array_like
        Learning rates, each strictly inside (0, 1).
    batch_schedule : BatchSchedule
        Batch lengths.
    delta_schedule : DeltaSchedule
        Perturbation sizes (default: ``log_quartic``).
    initial_price : array_like | None
        First baseline, inside the box shrunk by ``delta_1``. Box center when ``None``.
    slope_tolerance : float
        Fitted slopes with ``|beta_hat|`` below this send the target to the
        upper price bound (default: 1e-8).
    seed : int
        Seed of the run's random stream.
    log_periods : bool
        Keep a per-period log ``(t, Y, p, D)`` in the trace.
    """

    u: float | Sequence[float] | np.ndarray
    batch_schedule: BatchSchedule
    delta_schedule: DeltaSchedule = field(default_factory=DeltaSchedule.log_quartic)
    initial_price: Sequence[float] | np.ndarray | None = None
    slope_tolerance: float = DEFAULT_SLOPE_TOLERANCE
    seed: int = 0
    log_periods: bool = False

    def rates(self, n: int) -> np.ndarray:
        try:
            rate = as_price(self.u, n, name="u")
        except ValueError as e:
            raise SldlConfigError(str(e), field="u") from e
        if np.any(rate <= 0) or np.any(rate >= 1):
            raise SldlConfigError(f"learning rates must lie strictly inside (0, 1), got {rate.tolist()}", field="u")
        return rate

    def deltas(self, n: int) -> np.ndarray:
        """Perturbations for every batch plus one lookahead row, shape ``(K + 1, n)``."""
        lengths = np.append(self.batch_schedule.lengths(), self.batch_schedule.lookahead())
        return self.delta_schedule.values(lengths, n)

    def start(self, box: PriceBox) -> np.ndarray:
        if self.initial_price is None:
            return box.center.copy()
        try:
            return as_price(self.initial_price, box.n, name="initial_price")
        except ValueError as e:
            raise SldlConfigError(str(e), field="initial_price") from e

    def validate(self, box: PriceBox) -> None:
        """Check the configuration against a price box.

        Raises
        ------
        SldlConfigError
            If a learning rate is outside (0, 1), some batch's perturbation
            does not fit in the box or the initial price is outside the first
            shrunken box.
        """
        n = box.n
        self.rates(n)
        if self.slope_tolerance <= 0:
            raise SldlConfigError("slope tolerance must be > 0", field="slope_tolerance")
        deltas = self.deltas(n)
        too_wide = box.width[None, :] <= 2.0 * deltas
        if np.any(too_wide):
            k, i = (int(x) for x in np.argwhere(too_wide)[0])
            raise SldlConfigError(
                f"batch {k + 1} perturbation {deltas[k, i]:.6g} does not fit seller {i}'s box width {box.width[i]:.6g}",
                field="delta",
            )
        first = box.shrink(deltas[0])
        if not first.contains(self.start(box)):
            raise SldlConfigError("initial price must lie in the first shrunken box", field="initial_price")
        if not scaling_diagnostic(self.batch_schedule.lengths(), deltas[:-1]):
            logger.warning("Perturbation schedule fails the scaling diagnostic over the declared horizon")

    def to_dict(self) -> dict[str, Any]:
        return {
            "u": np.atleast_1d(np.asarray(self.u, dtype=float)).tolist(),
            "batches": self.batch_schedule.to_dict(),
            "delta": self.delta_schedule.to_dict(),
            "initial_price": None if self.initial_price is None else list(map(float, self.initial_price)),
            "slope_tolerance": self.slope_tolerance,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class OlsFit:
    """Univariate fit ``D = alpha - beta * p`` of one seller's batch."""

    alpha: float
    beta: float
    arms_high: int
    arms_low: int
    no_variation: bool


def ols_two_point(prices: ArrayLike, demands: ArrayLike) -> OlsFit:
    """Least-squares fit of demand on own price.

    With exactly two price levels the slope is the secant between the
    conditional demand means and is computed in that form. A single price
    level returns ``no_variation=True`` with NaN coefficients.

    Raises
    ------
    ValueError
        If the sequences differ in length or hold fewer than two periods.
    """
    p = np.asarray(prices, dtype=float)
    y = np.asarray(demands, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"prices and demands must be equal-length vectors, got {p.shape} and {y.shape}")
    if p.size < MIN_BATCH_LENGTH:
        raise ValueError("a fit needs at least two periods")
    high = p == p.max()
    low = p == p.min()
    arms_high = int(high.sum())
    if not np.any(~high):
        return OlsFit(alpha=math.nan, beta=math.nan, arms_high=arms_high, arms_low=0, no_variation=True)
    if np.all(high | low):
        beta = -(y[high].mean() - y[low].mean()) / (p.max() - p.min())
    else:
        dp = p - p.mean()
        beta = -float(dp @ (y - y.mean()) / (dp @ dp))
    alpha = float(y.mean() + beta * p.mean())
    return OlsFit(
        alpha=alpha, beta=float(beta), arms_high=arms_high, arms_low=int(p.size - arms_high), no_variation=False
    )


@dataclass(frozen=True, eq=False)
class PeriodLog:
    """Per-period record of one batch."""

    t: np.ndarray
    experiments: np.ndarray
    prices: np.ndarray
    demands: np.ndarray


@dataclass(frozen=True, eq=False)
class BatchState:
    """Inputs of one batch.

    Attributes
    ----------
    batch : int
        One-based batch index ``k``.
    price : np.ndarray
        Baseline ``p_hat_k`` inside the box shrunk by ``delta``.
    length : int
        Number of periods ``I_k``.
    delta : np.ndarray
        Perturbation ``delta_k`` per seller.
    next_delta : np.ndarray
        Perturbation of the following batch; defines the projection box.
    box : PriceBox
        Full price box.
    u : np.ndarray
        Learning rates.
    slope_tolerance : float
    start_period : int
        Global index of the batch's first period.
    """

    batch: int
    price: np.ndarray
    length: int
    delta: np.ndarray
    next_delta: np.ndarray
    box: PriceBox
    u: np.ndarray
    slope_tolerance: float = DEFAULT_SLOPE_TOLERANCE
    start_period: int = 0


@dataclass(frozen=True, eq=False)
class BatchRecord:
    """Everything one batch produced.

    ``alpha_hat``/``beta_hat`` are NaN for skipped sellers. ``target`` is the
    pre-projection move target (``alpha_hat / (2 beta_hat)``, or the upper
    price bound under the slope rule).
    """

    batch: int
    length: int
    delta: np.ndarray
    price: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    target: np.ndarray
    next_price: np.ndarray
    arms_high: np.ndarray
    arms_low: np.ndarray
    skipped: np.ndarray
    slope_default: np.ndarray
    negative_slope: np.ndarray
    clamped_low: np.ndarray
    clamped_high: np.ndarray
    empirical: EmpiricalDesign
    conjecture: ConjectureMatrix
    conjecture_defined: np.ndarray
    periods: PeriodLog | None = None

    @property
    def n(self) -> int:
        return int(self.price.size)

    def scaled_conjecture(self) -> np.ndarray:
        """Empirical conjecture weighted by ``delta_j / delta_i``."""
        ratio = self.delta[None, :] / self.delta[:, None]
        return self.conjecture.entries * ratio


def _fit_batch(
    experiments: np.ndarray, demands: np.ndarray, price: np.ndarray, delta: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Secant fits for every seller at once.

    Returns ``(alpha_hat, beta_hat, arms_high, arms_low)``; rows without
    variation have NaN coefficients.
    """
    length = experiments.shape[0]
    high_mask = experiments.astype(bool)
    arms_high = high_mask.sum(axis=0)
    arms_low = length - arms_high
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_high = np.where(high_mask, demands, 0.0).sum(axis=0) / arms_high
        mean_low = np.where(high_mask, 0.0, demands).sum(axis=0) / arms_low
    beta = -(mean_high - mean_low) / delta
    mean_price = price + delta * arms_high / length
    alpha = demands.mean(axis=0) + beta * mean_price
    varied = (arms_high > 0) & (arms_low > 0)
    alpha = np.where(varied, alpha, np.nan)
    beta = np.where(varied, beta, np.nan)
    return alpha, beta, arms_high, arms_low


def run_batch(
    state: BatchState,
    d: DemandSystem,
    noise: NoiseSpec | None,
    design: ExperimentDesign,
    rng: np.random.Generator,
    *,
    log_periods: bool = False,
) -> tuple[BatchRecord, np.ndarray]:
    """Run one batch and compute the next baseline.

    The random stream is consumed in a fixed order: all experiment draws of
    the batch first, then all demand shocks.

    Returns
    -------
    tuple[BatchRecord, np.ndarray]
        The batch record and ``p_hat_{k+1}``.
    """
    experiments = sample_periods(design, rng, state.length)
    posted = state.price + state.delta * experiments
    demands = sample_realized_demand(d, noise, posted, rng)

    alpha, beta, arms_high, arms_low = _fit_batch(experiments, demands, state.price, state.delta)
    skipped = np.isnan(beta)
    slope_default = ~skipped & (np.abs(np.nan_to_num(beta)) < state.slope_tolerance)
    negative = ~skipped & ~slope_default & (np.nan_to_num(beta) < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(slope_default, state.box.upper, alpha / (2.0 * beta))
    target = np.where(skipped, state.price, target)

    next_box = state.box.shrink(state.next_delta)
    raw = np.where(skipped, state.price, (1.0 - state.u) * state.price + state.u * target)
    next_price = next_box.project(raw)
    clamped_low = raw < next_box.lower
    clamped_high = raw > next_box.upper

    empirical = empirical_joint(experiments)
    conjecture, defined = empirical_conjecture(empirical)

    periods = None
    if log_periods:
        periods = PeriodLog(
            t=np.arange(state.start_period, state.start_period + state.length),
            experiments=experiments,
            prices=posted,
            demands=demands,
        )

    if np.any(skipped):
        held = np.flatnonzero(skipped).tolist()
        logger.warning("Batch %d: sellers %s saw one price level and hold", state.batch, held)
    if np.any(negative):
        logger.debug("Batch %d: negative fitted slopes for sellers %s", state.batch, np.flatnonzero(negative).tolist())

    record = BatchRecord(
        batch=state.batch,
        length=state.length,
        delta=np.asarray(state.delta, dtype=float).copy(),
        price=np.asarray(state.price, dtype=float).copy(),
        alpha_hat=alpha,
        beta_hat=beta,
        target=target,
        next_price=next_price,
        arms_high=arms_high.astype(np.int64),
        arms_low=arms_low.astype(np.int64),
        skipped=skipped,
        slope_default=slope_default,
        negative_slope=negative,
        clamped_low=clamped_low,
        clamped_high=clamped_high,
        empirical=empirical,
        conjecture=conjecture,
        conjecture_defined=defined,
        periods=periods,
    )
    return record, next_price


@dataclass
class SimulationTrace:
    """Batch-by-batch record of one learning run."""

    records: list[BatchRecord]
    box: PriceBox
    config: SldlConfig
    run_id: int = 0
    truncated: bool = False

    @property
    def n(self) -> int:
        return self.box.n

    def prices(self) -> np.ndarray:
        """Baselines ``p_hat_1 .. p_hat_{K+1}``, shape ``(K + 1, n)``."""
        rows = [r.price for r in self.records]
        rows.append(self.records[-1].next_price)
        return np.vstack(rows)

    @property
    def final_price(self) -> np.ndarray:
        return self.records[-1].next_price

    def cumulative_periods(self) -> np.ndarray:
        """Total periods elapsed at each batch end."""
        return np.cumsum([r.length for r in self.records])

    def errors(self, target: ArrayLike) -> np.ndarray:
        """``||p_hat_{k+1} - target||_inf`` after every batch."""
        target = np.asarray(target, dtype=float)
        post = np.vstack([r.next_price for r in self.records])
        return np.max(np.abs(post - target), axis=1)

    def to_frame(self, target: ArrayLike | None = None) -> pl.DataFrame:
        """One row per batch and seller."""
        errors = self.errors(target) if target is not None else None
        rows: list[dict[str, Any]] = []
        for k, r in enumerate(self.records):
            for i in range(self.n):
                rows.append(
                    {
                        "run_id": self.run_id,
                        "batch": r.batch,
                        "seller": i + 1,
                        "p_hat": float(r.price[i]),
                        "alpha_hat": None if r.skipped[i] else float(r.alpha_hat[i]),
                        "beta_hat": None if r.skipped[i] else float(r.beta_hat[i]),
                        "p_next": float(r.next_price[i]),
                        "delta": float(r.delta[i]),
                        "arms_high": int(r.arms_high[i]),
                        "arms_low": int(r.arms_low[i]),
                        "skipped": bool(r.skipped[i]),
                        "slope_default": bool(r.slope_default[i]),
                        "negative_slope": bool(r.negative_slope[i]),
                        "clamped_low": bool(r.clamped_low[i]),
                        "clamped_high": bool(r.clamped_high[i]),
                        "err_inf_vs_target": None if errors is None else float(errors[k]),
                    }
                )
        return pl.DataFrame(rows)

    def period_frame(self) -> pl.DataFrame:
        """Per-period log; empty unless the run was configured with ``log_periods``."""
        frames = []
        for r in self.records:
            if r.periods is None:
                continue
            log = r.periods
            data: dict[str, Any] = {"t": log.t, "batch": np.full(log.t.size, r.batch)}
            for i in range(self.n):
                data[f"Y_{i + 1}"] = log.experiments[:, i]
                data[f"p_{i + 1}"] = log.prices[:, i]
                data[f"D_{i + 1}"] = log.demands[:, i]
            frames.append(pl.DataFrame(data))
        return pl.concat(frames) if frames else pl.DataFrame()

    def summary(self, target: ArrayLike | None = None) -> dict[str, Any]:
        summary: dict[str, Any] = {
            "run_id": self.run_id,
            "batches": len(self.records),
            "periods": int(self.cumulative_periods()[-1]),
            "final_price": self.final_price.tolist(),
            "skipped_seller_batches": int(sum(r.skipped.sum() for r in self.records)),
            "truncated_last_batch": self.truncated,
            "config": self.config.to_dict(),
        }
        if target is not None:
            summary["target"] = np.asarray(target, dtype=float).tolist()
            summary["final_error"] = float(self.errors(target)[-1])
        return summary


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` of a plan seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_sldl(
    cfg: SldlConfig,
    d: DemandSystem,
    noise: NoiseSpec | None,
    design_schedule: DesignSchedule | ExperimentDesign,
    *,
    box: PriceBox | None = None,
    rng: np.random.Generator | None = None,
    run_id: int = 0,
) -> SimulationTrace:
    """Run all batches of the learning algorithm.

    Parameters
    ----------
    cfg : SldlConfig
        Validated against ``box`` before any simulation.
    d : DemandSystem
        True market demand, unknown to the sellers.
    noise : NoiseSpec | None
        Demand shocks; ``None`` for noiseless runs.
    design_schedule : DesignSchedule | ExperimentDesign
        Experimentation laws per batch.
    rng : np.random.Generator | None
        Random stream; ``default_rng(cfg.seed)`` when omitted.

    Returns
    -------
    SimulationTrace
    """
    box = box or d.box
    if isinstance(design_schedule, ExperimentDesign):
        design_schedule = DesignSchedule.constant(design_schedule)
    if design_schedule.n != d.n:
        raise SldlConfigError(f"design is for {design_schedule.n} sellers, demand has {d.n}", field="design")
    cfg.validate(box)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    lengths = cfg.batch_schedule.lengths()
    deltas = cfg.deltas(d.n)
    u = cfg.rates(d.n)
    price = cfg.start(box)

    records: list[BatchRecord] = []
    start = 0
    for k, length in enumerate(lengths):
        state = BatchState(
            batch=k + 1,
            price=price,
            length=int(length),
            delta=deltas[k],
            next_delta=deltas[k + 1],
            box=box,
            u=u,
            slope_tolerance=cfg.slope_tolerance,
            start_period=start,
        )
        record, price = run_batch(state, d, noise, design_schedule.for_batch(k), rng, log_periods=cfg.log_periods)
        records.append(record)
        start += int(length)

    logger.debug("Run %d finished %d batches (%d periods) at %s", run_id, len(records), start, price.tolist())
    return SimulationTrace(
        records=records, box=box, config=cfg, run_id=run_id, truncated=cfg.batch_schedule.truncated
    )
