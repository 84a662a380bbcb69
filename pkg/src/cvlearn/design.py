"""Joint experimentation laws over {0,1}^n and the conjecture matrices they induce.

Outcomes are indexed lexicographically with seller 1 as the most significant
bit, so for two sellers the table order is ``00, 01, 10, 11``.

Examples
--------
>>> from cvlearn.design import build_design, conjecture_matrix
>>> from cvlearn.models import DesignKind
>>> design = build_design(DesignKind.COMMON_SHOCK_MIXTURE, n=2, rho=0.5, q=0.5)
>>> design.to_dict()
{'00': 0.375, '01': 0.125, '10': 0.125, '11': 0.375}
>>> conjecture_matrix(design).entries.tolist()
[[0.0, 0.5], [0.5, 0.0]]
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from cvlearn.models import DesignKind

logger = logging.getLogger(__name__)

# Dense tables hold 2^n masses
MAX_SELLERS = 16

MASS_TOLERANCE = 1e-12
ENTRY_TOLERANCE = 1e-12


class DesignValidationError(ValueError):
    """Raised when a design table or its parameters are invalid.

    Attributes
    ----------
    field : str
        Design parameter at fault (``table``, ``q``, ``rho``, ``n``).
    """

    def __init__(self, message: str, field: str = "table"):
        super().__init__(message)
        self.field = field


class UndefinedConditionalError(ValueError):
    """Raised when a conditional probability has a degenerate conditioning event.

    A seller that experiments always (or never) leaves one of
    ``P(. | Y_i = 1)`` and ``P(. | Y_i = 0)`` undefined.
    """

    def __init__(self, seller: int, marginal: float):
        super().__init__(f"seller {seller} has degenerate experimentation marginal {marginal:.6g}")
        self.seller = seller
        self.marginal = marginal


def outcome_matrix(n: int) -> np.ndarray:
    """All outcomes in canonical order, shape ``(2 ** n, n)``."""
    idx = np.arange(2**n)
    shifts = np.arange(n - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


def outcome_index(outcomes: ArrayLike) -> np.ndarray:
    """Canonical table index of each outcome row."""
    arr = np.asarray(outcomes, dtype=np.int64)
    n = arr.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1)
    return arr @ weights


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_SELLERS:
        raise DesignValidationError(f"design supports 1..{MAX_SELLERS} sellers, got {n}", field="n")


@dataclass(frozen=True, eq=False)
class ExperimentDesign:
    """Probability table over the ``2 ** n`` experiment outcomes.

    Attributes
    ----------
    n : int
        Number of sellers, at most 16.
    table : np.ndarray
        Masses in canonical order. Nonnegative, summing to one within 1e-12.
    allow_degenerate : bool
        Accept sellers whose experimentation marginal is 0 or 1. Empirical
        tables from short batches use this.
    """

    n: int
    table: np.ndarray
    allow_degenerate: bool = False

    def __post_init__(self) -> None:
        _check_n(self.n)
        table = np.array(self.table, dtype=float)
        if table.shape != (2**self.n,):
            raise DesignValidationError(f"table must hold {2**self.n} masses, got shape {table.shape}")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise DesignValidationError("table masses must be finite and >= 0")
        total = float(table.sum())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise DesignValidationError(f"table masses sum to {total:.12g}, expected 1")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        if not self.allow_degenerate:
            q = self.marginals()
            bad = np.flatnonzero((q <= 0) | (q >= 1))
            if bad.size:
                raise DesignValidationError(
                    f"seller {int(bad[0])} has degenerate experimentation marginal {q[bad[0]]:.6g}", field="table"
                )

    @property
    def outcomes(self) -> np.ndarray:
        return outcome_matrix(self.n)

    def marginals(self) -> np.ndarray:
        """``P(Y_i = 1)`` per seller."""
        return self.table @ self.outcomes

    def pairwise(self) -> np.ndarray:
        """``P(Y_i = 1, Y_j = 1)`` for all pairs; the diagonal holds the marginals."""
        o = self.outcomes.astype(float)
        return o.T @ (self.table[:, None] * o)

    def conditional_high(self) -> np.ndarray:
        """Entry ``[i, j] = P(Y_j = 1 | Y_i = 1)``."""
        q = self.marginals()
        return self.pairwise() / q[:, None]

    def conditional_low(self) -> np.ndarray:
        """Entry ``[i, j] = P(Y_j = 1 | Y_i = 0)``."""
        q = self.marginals()
        return (q[None, :] - self.pairwise()) / (1.0 - q)[:, None]

    def mass(self, outcome: str | Sequence[int]) -> float:
        if isinstance(outcome, str):
            return float(self.table[int(outcome, 2)])
        return float(self.table[int(outcome_index(np.asarray(outcome)))])

    def to_dict(self) -> dict[str, float]:
        return {bitstring(i, self.n): float(m) for i, m in enumerate(self.table)}


def _independent_table(q: np.ndarray) -> np.ndarray:
    o = outcome_matrix(q.size)
    return np.prod(np.where(o == 1, q, 1.0 - q), axis=1)


def _table_from_mapping(table: Mapping[str, float], n: int) -> np.ndarray:
    dense = np.zeros(2**n)
    for key, mass in table.items():
        if len(key) != n or set(key) - {"0", "1"}:
            raise DesignValidationError(f"outcome key {key!r} is not a {n}-bit string")
        dense[int(key, 2)] = float(mass)
    return dense


def build_design(
    kind: DesignKind | str,
    *,
    n: int | None = None,
    q: ArrayLike | None = None,
    rho: float | None = None,
    table: Mapping[str, float] | ArrayLike | None = None,
    allow_degenerate: bool = False,
) -> ExperimentDesign:
    """Construct a validated experimentation law.

    Parameters
    ----------
    kind : DesignKind | str
        ``independent`` needs per-seller marginals ``q``. ``common_shock_mixture``
        needs ``n``, ``rho`` in [0, 1) and a shared ``q``: with probability
        ``rho`` all sellers copy one Bernoulli(q) bit, otherwise bits are
        independent Bernoulli(q). ``explicit_table`` needs ``table``, either a
        bitstring mapping (missing outcomes get mass 0) or a dense array.
    n : int | None
        Seller count. Inferred from ``q`` or ``table`` when omitted.

    Returns
    -------
    ExperimentDesign

    Raises
    ------
    DesignValidationError
        On invalid probabilities, degenerate marginals or a mass-sum violation.
    """
    kind = DesignKind(kind)
    if kind is DesignKind.INDEPENDENT:
        if q is None:
            raise DesignValidationError("independent design requires marginals q", field="q")
        qv = np.atleast_1d(np.asarray(q, dtype=float))
        if n is not None and qv.size == 1:
            qv = np.full(n, float(qv[0]))
        if np.any(qv <= 0) or np.any(qv >= 1):
            raise DesignValidationError("marginals q must lie strictly inside (0, 1)", field="q")
        return ExperimentDesign(n=qv.size, table=_independent_table(qv), allow_degenerate=allow_degenerate)

    if kind is DesignKind.COMMON_SHOCK_MIXTURE:
        if n is None or rho is None or q is None:
            raise DesignValidationError("mixture design requires n, rho and q", field="rho")
        _check_n(n)
        shared = float(np.asarray(q, dtype=float))
        if not 0 < shared < 1:
            raise DesignValidationError(f"mixture q must lie in (0, 1), got {shared}", field="q")
        if not 0 <= rho < 1:
            raise DesignValidationError(f"mixture rho must lie in [0, 1), got {rho}", field="rho")
        coupled = np.zeros(2**n)
        coupled[0] = 1.0 - shared
        coupled[-1] = shared
        mixed = rho * coupled + (1.0 - rho) * _independent_table(np.full(n, shared))
        return ExperimentDesign(n=n, table=mixed, allow_degenerate=allow_degenerate)

    if table is None:
        raise DesignValidationError("explicit design requires a table")
    if isinstance(table, Mapping):
        if not table:
            raise DesignValidationError("explicit table is empty")
        width = n if n is not None else len(next(iter(table)))
        dense = _table_from_mapping(table, width)
    else:
        dense = np.asarray(table, dtype=float)
        width = n if n is not None else int(np.log2(dense.size))
    return ExperimentDesign(n=width, table=dense, allow_degenerate=allow_degenerate)


@dataclass(frozen=True, eq=False)
class ConjectureMatrix:
    """Square matrix with zero diagonal, entry ``[i, j]`` being seller i's
    conjectured response of rival j's price to its own.

    Attributes
    ----------
    entries : np.ndarray
        The ``(n, n)`` matrix.
    bounded : bool
        Enforce every entry in [-1, 1]. Matrices rescaled by perturbation
        ratios can leave that range and are built with ``bounded=False``.
    """

    entries: np.ndarray
    bounded: bool = True

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"conjecture matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("conjecture matrix entries must be finite")
        if np.any(np.diag(a) != 0):
            raise ValueError("conjecture matrix diagonal must be exactly 0")
        if self.bounded and np.any(np.abs(a) > 1 + ENTRY_TOLERANCE):
            raise ValueError("conjecture matrix entries must lie in [-1, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def zeros(cls, n: int) -> ConjectureMatrix:
        return cls(np.zeros((n, n)))

    @classmethod
    def uniform(cls, n: int, value: float) -> ConjectureMatrix:
        """All off-diagonal entries equal to ``value``."""
        return cls(value * (np.ones((n, n)) - np.eye(n)), bounded=abs(value) <= 1)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.entries)

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.entries >= 0))

    def to_list(self) -> list[list[float]]:
        return self.entries.tolist()


def as_conjecture(A: ConjectureMatrix | ArrayLike | float | None, n: int) -> ConjectureMatrix:
    """Coerce ``None`` (zero), a scalar (uniform off-diagonal) or a matrix."""
    if A is None:
        return ConjectureMatrix.zeros(n)
    if isinstance(A, ConjectureMatrix):
        if A.n != n:
            raise ValueError(f"conjecture matrix is {A.n}x{A.n}, expected {n}x{n}")
        return A
    arr = np.asarray(A, dtype=float)
    if arr.ndim == 0:
        return ConjectureMatrix.uniform(n, float(arr))
    if arr.shape != (n, n):
        raise ValueError(f"conjecture matrix must be {n}x{n}, got {arr.shape}")
    return ConjectureMatrix(arr, bounded=False)


def _ratio_matrix(ratio: ArrayLike | None, n: int) -> np.ndarray | None:
    if ratio is None:
        return None
    r = np.asarray(ratio, dtype=float)
    if r.shape != (n, n):
        raise ValueError(f"ratio must be {n}x{n}, got {r.shape}")
    return r


def conjecture_matrix(design: ExperimentDesign, ratio: ArrayLike | None = None) -> ConjectureMatrix:
    """Conjecture matrix induced by an experimentation law.

    Entry ``(i, j)`` is ``ratio[i, j] * (P(Y_j=1 | Y_i=1) - P(Y_j=1 | Y_i=0))``,
    with the diagonal forced to zero. ``ratio`` holds ``delta_j / delta_i``
    and defaults to all ones.

    Raises
    ------
    UndefinedConditionalError
        If some seller's experimentation marginal is 0 or 1.
    """
    q = design.marginals()
    bad = np.flatnonzero((q <= 0) | (q >= 1))
    if bad.size:
        raise UndefinedConditionalError(int(bad[0]), float(q[bad[0]]))
    entries = design.conditional_high() - design.conditional_low()
    r = _ratio_matrix(ratio, design.n)
    if r is not None:
        entries = entries * r
    np.fill_diagonal(entries, 0.0)
    if r is None:
        entries = np.clip(entries, -1.0, 1.0)
    return ConjectureMatrix(entries, bounded=r is None)


@dataclass(frozen=True, eq=False)
class EmpiricalDesign:
    """Outcome counts observed within one batch.

    Attributes
    ----------
    n : int
        Number of sellers.
    counts : np.ndarray
        Occurrences of each outcome in canonical order.
    total : int
        Batch length, equal to ``counts.sum()``.
    """

    n: int
    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2**self.n,) or np.any(counts < 0):
            raise ValueError(f"counts must be {2**self.n} nonnegative integers")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", int(counts.sum()))

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def arms_high(self) -> np.ndarray:
        """Periods in which each seller experimented (``Y_i = 1``)."""
        return self.counts @ outcome_matrix(self.n).astype(np.int64)

    @property
    def arms_low(self) -> np.ndarray:
        """Periods in which each seller posted its baseline (``Y_i = 0``)."""
        return self.total - self.arms_high

    @property
    def pair_counts(self) -> np.ndarray:
        o = outcome_matrix(self.n).astype(np.int64)
        return o.T @ (self.counts[:, None] * o)

    def as_design(self) -> ExperimentDesign:
        return ExperimentDesign(n=self.n, table=self.frequencies, allow_degenerate=True)

    def tv_distance(self, design: ExperimentDesign) -> float:
        """Total-variation distance to another table."""
        return 0.5 * float(np.abs(self.frequencies - design.table).sum())

    def to_dict(self) -> dict[str, Any]:
        return {bitstring(i, self.n): int(c) for i, c in enumerate(self.counts) if c}


def empirical_joint(samples: ArrayLike) -> EmpiricalDesign:
    """Exact frequency table of a sequence of outcome vectors.

    ``samples`` is ``(T, n)`` of 0/1 entries, or a sequence of bitstrings.
    """
    if isinstance(samples, Sequence) and samples and isinstance(samples[0], str):
        arr = np.array([[int(c) for c in s] for s in samples], dtype=np.int64)
    else:
        arr = np.asarray(samples, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("empirical_joint needs a nonempty (T, n) sample array")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("outcome entries must be 0 or 1")
    n = arr.shape[1]
    _check_n(n)
    counts = np.bincount(outcome_index(arr), minlength=2**n)
    return EmpiricalDesign(n=n, counts=counts)


def empirical_conjecture(
    emp: EmpiricalDesign, ratio: ArrayLike | None = None
) -> tuple[ConjectureMatrix, np.ndarray]:
    """Batch analogue of :func:`conjecture_matrix`.

    Returns
    -------
    tuple[ConjectureMatrix, np.ndarray]
        The matrix and a boolean mask of defined entries. Rows whose seller
        missed an arm are undefined and set to zero.
    """
    n = emp.n
    high = emp.arms_high.astype(float)
    low = emp.arms_low.astype(float)
    pairs = emp.pair_counts.astype(float)
    defined_row = (high > 0) & (low > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond_high = pairs / high[:, None]
        cond_low = (high[None, :] - pairs) / low[:, None]
        entries = cond_high - cond_low
    defined = np.broadcast_to(defined_row[:, None], (n, n)) & ~np.eye(n, dtype=bool)
    entries = np.where(defined, entries, 0.0)
    r = _ratio_matrix(ratio, n)
    if r is not None:
        entries = entries * r
    else:
        entries = np.clip(entries, -1.0, 1.0)
    return ConjectureMatrix(entries, bounded=r is None), defined


def sample_periods(design: ExperimentDesign, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` outcomes by inverse CDF over the canonical ordering."""
    cdf = np.cumsum(design.table)
    cdf /= cdf[-1]
    u = rng.random(size)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), design.table.size - 1)
    return outcome_matrix(design.n)[idx]


def sample_period(design: ExperimentDesign, rng: np.random.Generator) -> np.ndarray:
    """Draw one outcome vector ``Y`` in {0,1}^n."""
    return sample_periods(design, rng, 1)[0]


@dataclass(frozen=True, eq=False)
class DesignSchedule:
    """Per-batch experimentation laws with a declared limit law.

    Batches past the end of ``designs`` reuse the last entry.
    """

    designs: tuple[ExperimentDesign, ...]
    target: ExperimentDesign

    def __post_init__(self) -> None:
        if not self.designs:
            raise DesignValidationError("design schedule needs at least one design")
        sizes = {d.n for d in self.designs} | {self.target.n}
        if len(sizes) != 1:
            raise DesignValidationError(f"designs disagree on seller count: {sorted(sizes)}", field="n")
        object.__setattr__(self, "designs", tuple(self.designs))

    @classmethod
    def constant(cls, design: ExperimentDesign) -> DesignSchedule:
        return cls(designs=(design,), target=design)

    @property
    def n(self) -> int:
        return self.target.n

    def for_batch(self, k: int) -> ExperimentDesign:
        """Law used in zero-based batch ``k``."""
        return self.designs[min(k, len(self.designs) - 1)]
