"""Mean-demand systems, their derivatives, regularity scans and demand shocks.

Examples
--------
>>> import numpy as np
>>> from cvlearn.demand import LinearDemand, PriceBox
>>> box = PriceBox(lower=[1.0, 1.0], upper=[9.0, 9.0])
>>> d = LinearDemand(a=[100.0, 100.0], b=[[10.0, 4.0], [4.0, 10.0]], box=box)
>>> d.mean(np.array([6.25, 6.25])).tolist()
[62.5, 62.5]
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import softmax
from scipy.stats import norm, qmc

from cvlearn.models import DemandBounds, DemandKind, NoiseKind, RegularityViolation

logger = logging.getLogger(__name__)

# Scan grid resolution per dimension
DEFAULT_GRID_RESOLUTION_SMALL = 64
DEFAULT_GRID_RESOLUTION_LARGE = 16
SMALL_DIMENSION = 3

# Points evaluated per vectorised chunk during scans
SCAN_CHUNK_SIZE = 8192

# Violations kept verbatim in a DemandBounds report
MAX_REPORTED_VIOLATIONS = 20

# Relative slack when testing box membership
DOMAIN_TOLERANCE = 1e-12


class PriceDomainError(ValueError):
    """Raised when demand is evaluated at a price outside the box.

    Prices produced by the learning dynamics are always projected, so this
    usually means a caller passed an initial price or target by hand.
    """


class DemandValidationError(ValueError):
    """Raised when demand parameters are inconsistent or irregular.

    Attributes
    ----------
    field : str
        Parameter that failed validation (``a``, ``b``, ``box``).
    """

    def __init__(self, message: str, field: str = "b"):
        super().__init__(message)
        self.field = field


def default_grid_resolution(n: int) -> int:
    """Grid points per dimension used when none is given."""
    return DEFAULT_GRID_RESOLUTION_SMALL if n <= SMALL_DIMENSION else DEFAULT_GRID_RESOLUTION_LARGE


def _readonly(values: ArrayLike, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DemandValidationError(f"{name} must have {ndim} dimension(s), got shape {arr.shape}", field=name)
    if not np.all(np.isfinite(arr)):
        raise DemandValidationError(f"{name} must be finite", field=name)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceBox:
    """Product of closed price intervals ``[lower_i, upper_i]``.

    Attributes
    ----------
    lower : np.ndarray
        Strictly positive lower bounds.
    upper : np.ndarray
        Upper bounds, strictly above ``lower``.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = _readonly(self.lower, 1, "lower")
        upper = _readonly(self.upper, 1, "upper")
        if lower.shape != upper.shape or lower.size == 0:
            raise DemandValidationError(f"box bounds disagree in shape: {lower.shape} vs {upper.shape}", field="box")
        if np.any(lower <= 0):
            raise DemandValidationError("box lower bounds must be > 0", field="box")
        if np.any(upper <= lower):
            raise DemandValidationError("box upper bounds must exceed lower bounds", field="box")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return int(self.lower.size)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def shrink(self, delta: ArrayLike) -> PriceBox:
        """Return ``[lower + delta, upper - delta]``.

        Raises
        ------
        ValueError
            If some side is not wider than ``2 * delta``.
        """
        delta = np.broadcast_to(np.asarray(delta, dtype=float), self.lower.shape)
        if np.any(delta < 0):
            raise ValueError("shrink amounts must be nonnegative")
        if np.any(self.width <= 2.0 * delta):
            bad = int(np.argmax(self.width <= 2.0 * delta))
            raise ValueError(f"box side {bad} of width {self.width[bad]:.6g} cannot be shrunk by {delta[bad]:.6g}")
        return PriceBox(lower=self.lower + delta, upper=self.upper - delta)

    def project(self, p: ArrayLike) -> np.ndarray:
        """Componentwise clamp onto the box."""
        return np.clip(np.asarray(p, dtype=float), self.lower, self.upper)

    def contains(self, p: ArrayLike, atol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - atol) and np.all(p <= self.upper + atol))

    def grid_size(self, resolution: int) -> int:
        return resolution**self.n

    def iter_grid(self, resolution: int, chunk_size: int = SCAN_CHUNK_SIZE) -> Iterator[np.ndarray]:
        """Yield the tensor grid in chunks of shape ``(m, n)``.

        Points are ordered lexicographically with seller 1 varying slowest.
        """
        if resolution < 2:
            raise ValueError(f"grid resolution must be >= 2, got {resolution}")
        axes = np.linspace(self.lower, self.upper, resolution)  # (resolution, n)
        shape = (resolution,) * self.n
        total = self.grid_size(resolution)
        for start in range(0, total, chunk_size):
            idx = np.unravel_index(np.arange(start, min(start + chunk_size, total)), shape)
            yield np.stack([axes[idx[i], i] for i in range(self.n)], axis=-1)

    def grid(self, resolution: int) -> np.ndarray:
        """Full tensor grid, shape ``(resolution ** n, n)``."""
        return np.concatenate(list(self.iter_grid(resolution)), axis=0)

    def sample(self, count: int, seed: int | np.random.Generator | None = 0) -> np.ndarray:
        """Latin-hypercube sample of ``count`` points inside the box."""
        sampler = qmc.LatinHypercube(d=self.n, seed=seed)
        return qmc.scale(sampler.random(count), self.lower, self.upper)

    def to_dict(self) -> dict[str, Any]:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


class DemandSystem(ABC):
    """Mean demand ``lambda(p)`` on a price box with analytic derivatives.

    Evaluation methods accept arrays with any number of leading batch
    dimensions: ``p`` of shape ``(..., n)`` gives demand ``(..., n)``,
    gradient ``(..., n, n)`` and Hessian ``(..., n, n, n)``. Gradient entry
    ``[i, j]`` is ``d lambda_i / d p_j``; Hessian entry ``[i, j, l]`` is
    ``d2 lambda_i / d p_j d p_l``.
    """

    kind: DemandKind

    def __init__(self, box: PriceBox):
        self.box = box

    @property
    def n(self) -> int:
        return self.box.n

    def check_domain(self, p: ArrayLike) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1:] != (self.n,):
            raise PriceDomainError(f"expected prices with trailing dimension {self.n}, got shape {p.shape}")
        slack = DOMAIN_TOLERANCE * np.maximum(1.0, self.box.upper)
        if np.any(p < self.box.lower - slack) or np.any(p > self.box.upper + slack):
            raise PriceDomainError(f"price outside box [{self.box.lower}, {self.box.upper}]")
        return p

    def mean(self, p: ArrayLike) -> np.ndarray:
        return self._mean(self.check_domain(p))

    def gradient(self, p: ArrayLike) -> np.ndarray:
        return self._gradient(self.check_domain(p))

    def hessian(self, p: ArrayLike) -> np.ndarray:
        return self._hessian(self.check_domain(p))

    @abstractmethod
    def _mean(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _gradient(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _hessian(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...


class LinearDemand(DemandSystem):
    """``lambda_i = a_i - b_ii p_i + sum_{j != i} b_ij p_j``.

    Parameters
    ----------
    a : array_like
        Intercepts, shape ``(n,)``.
    b : array_like
        Sensitivities, shape ``(n, n)``. Diagonal entries are positive own-price
        sensitivities, off-diagonal entries nonnegative cross sensitivities.
    box : PriceBox
        Feasible prices. Demand must stay positive on the whole box.

    Raises
    ------
    DemandValidationError
        On shape mismatch, sign violations or non-positive demand somewhere on the box.
    """

    kind = DemandKind.LINEAR

    def __init__(self, a: ArrayLike, b: ArrayLike, box: PriceBox):
        super().__init__(box)
        self.a = _readonly(a, 1, "a")
        self.b = _readonly(b, 2, "b")
        n = box.n
        if self.a.shape != (n,):
            raise DemandValidationError(f"a must have length {n}, got {self.a.size}", field="a")
        if self.b.shape != (n, n):
            raise DemandValidationError(f"b must be {n}x{n}, got {self.b.shape}", field="b")
        own = np.diag(self.b)
        cross = self.b - np.diag(own)
        if np.any(own <= 0):
            raise DemandValidationError("own-price sensitivities b_ii must be > 0", field="b")
        if np.any(cross < 0):
            raise DemandValidationError("cross-price sensitivities b_ij must be >= 0", field="b")
        slope = cross - np.diag(own)
        slope.setflags(write=False)
        self._slope = slope
        # demand is smallest at own upper bound and rivals' lower bounds
        worst = self.a - own * box.upper + cross @ box.lower
        if np.any(worst <= 0):
            seller = int(np.argmin(worst))
            raise DemandValidationError(
                f"linear demand of seller {seller} reaches {worst[seller]:.6g} <= 0 on the box", field="a"
            )

    @property
    def own(self) -> np.ndarray:
        return np.diag(self.b)

    @property
    def cross(self) -> np.ndarray:
        return self.b - np.diag(self.own)

    def _mean(self, p: np.ndarray) -> np.ndarray:
        return self.a + p @ self._slope.T

    def _gradient(self, p: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self._slope, p.shape[:-1] + (self.n, self.n)).copy()

    def _hessian(self, p: np.ndarray) -> np.ndarray:
        return np.zeros(p.shape[:-1] + (self.n, self.n, self.n))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "a": self.a.tolist(), "b": self.b.tolist(), "box": self.box.to_dict()}


class MnlDemand(DemandSystem):
    """Multinomial logit shares with an outside option.

    ``lambda_i = exp(a_i - b_i p_i) / (1 + sum_j exp(a_j - b_j p_j))``

    Parameters
    ----------
    a : array_like
        Quality intercepts, shape ``(n,)``.
    b : array_like
        Positive own-price sensitivities, shape ``(n,)``.
    box : PriceBox
        Feasible prices.
    """

    kind = DemandKind.MNL

    def __init__(self, a: ArrayLike, b: ArrayLike, box: PriceBox):
        super().__init__(box)
        self.a = _readonly(a, 1, "a")
        self.b = _readonly(b, 1, "b")
        if self.a.shape != (box.n,):
            raise DemandValidationError(f"a must have length {box.n}, got {self.a.size}", field="a")
        if self.b.shape != (box.n,):
            raise DemandValidationError(f"b must have length {box.n}, got {self.b.size}", field="b")
        if np.any(self.b <= 0):
            raise DemandValidationError("MNL price sensitivities must be > 0", field="b")

    @property
    def symmetric(self) -> bool:
        return bool(np.all(self.b == self.b[0]))

    def _mean(self, p: np.ndarray) -> np.ndarray:
        v = self.a - self.b * p
        outside = np.zeros(v.shape[:-1] + (1,))
        return softmax(np.concatenate([outside, v], axis=-1), axis=-1)[..., 1:]

    def _gradient(self, p: np.ndarray) -> np.ndarray:
        lam = self._mean(p)
        eye = np.eye(self.n)
        # g_ij = -b_j lambda_i (delta_ij - lambda_j)
        return -self.b * lam[..., :, None] * (eye - lam[..., None, :])

    def _hessian(self, p: np.ndarray) -> np.ndarray:
        lam = self._mean(p)
        eye = np.eye(self.n)
        g = -self.b * lam[..., :, None] * (eye - lam[..., None, :])
        dev = eye - lam[..., None, :]
        # H_ijl = -b_j [g_il (delta_ij - lambda_j) - lambda_i g_jl]
        inner = g[..., :, None, :] * dev[..., :, :, None] - lam[..., :, None, None] * g[..., None, :, :]
        return -self.b[:, None] * inner

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "a": self.a.tolist(), "b": self.b.tolist(), "box": self.box.to_dict()}


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Mean-zero demand shocks, i.i.d. over periods.

    Attributes
    ----------
    kind : NoiseKind
        ``BOUNDED_UNIFORM`` draws from ``[-sigma*sqrt(3), sigma*sqrt(3)]``;
        ``GAUSSIAN`` may produce negative realized demand.
    sigma : np.ndarray
        Per-seller standard deviations, all > 0.
    correlation : np.ndarray | None
        Cross-seller correlation matrix. Bounded noise is correlated through a
        Gaussian copula. ``None`` means independent shocks.

    Examples
    --------
    >>> noise = NoiseSpec(kind=NoiseKind.BOUNDED_UNIFORM, sigma=[1.0, 1.0])
    >>> noise.half_width.tolist()
    [1.7320508075688772, 1.7320508075688772]
    """

    kind: NoiseKind
    sigma: np.ndarray
    correlation: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        sigma = np.atleast_1d(np.array(self.sigma, dtype=float))
        if sigma.ndim != 1 or not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise ValueError("noise sigma must be a vector of finite values > 0")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        if self.correlation is not None:
            corr = np.array(self.correlation, dtype=float)
            n = sigma.size
            if corr.shape != (n, n):
                raise ValueError(f"noise correlation must be {n}x{n}, got {corr.shape}")
            if not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1.0):
                raise ValueError("noise correlation must be symmetric with unit diagonal")
            try:
                chol = np.linalg.cholesky(corr)
            except np.linalg.LinAlgError as e:
                raise ValueError("noise correlation must be positive definite") from e
            corr.setflags(write=False)
            object.__setattr__(self, "correlation", corr)
            object.__setattr__(self, "_chol", chol)

    @classmethod
    def nonnegative(cls, bounds: DemandBounds, n: int, fraction: float = 1.0) -> NoiseSpec:
        """Bounded uniform noise whose support half-width is ``fraction * m0``.

        With ``fraction <= 1`` realized demand stays nonnegative on the box.
        """
        if not 0 < fraction <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
        sigma = np.full(n, fraction * bounds.m0 / math.sqrt(3.0))
        return cls(kind=NoiseKind.BOUNDED_UNIFORM, sigma=sigma)

    @property
    def n(self) -> int:
        return int(self.sigma.size)

    @property
    def half_width(self) -> np.ndarray:
        """Support half-width for bounded noise, ``inf`` for Gaussian."""
        if self.kind is NoiseKind.GAUSSIAN:
            return np.full(self.n, np.inf)
        return self.sigma * math.sqrt(3.0)

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...] = ()) -> np.ndarray:
        """Draw shocks of shape ``size + (n,)``."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        shape = shape + (self.n,)
        if self._chol is None:
            if self.kind is NoiseKind.GAUSSIAN:
                return self.sigma * rng.standard_normal(shape)
            hw = self.half_width
            return rng.uniform(-hw, hw, size=shape)
        z = rng.standard_normal(shape) @ self._chol.T
        if self.kind is NoiseKind.GAUSSIAN:
            return self.sigma * z
        return self.half_width * (2.0 * norm.cdf(z) - 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "sigma": self.sigma.tolist(),
            "correlation": None if self.correlation is None else self.correlation.tolist(),
        }


def mean_demand(d: DemandSystem, p: ArrayLike) -> np.ndarray:
    """Evaluate ``lambda(p)``.

    Raises
    ------
    PriceDomainError
        If ``p`` lies outside the demand's price box.
    """
    return d.mean(p)


def demand_gradient(d: DemandSystem, p: ArrayLike) -> np.ndarray:
    """Jacobian of mean demand, entry ``[i, j] = d lambda_i / d p_j``."""
    return d.gradient(p)


def demand_hessian(d: DemandSystem, p: ArrayLike) -> np.ndarray:
    """All second derivatives, entry ``[i, j, l] = d2 lambda_i / d p_j d p_l``."""
    return d.hessian(p)


def demand_hessian_row(d: DemandSystem, p: ArrayLike, i: int) -> np.ndarray:
    """Hessian of ``lambda_i`` alone, shape ``(..., n, n)``."""
    if not 0 <= i < d.n:
        raise IndexError(f"seller index {i} out of range for n={d.n}")
    return d.hessian(p)[..., i, :, :]


def revenues(d: DemandSystem, p: ArrayLike) -> np.ndarray:
    """Expected per-seller revenue ``p_i * lambda_i(p)``."""
    p = np.asarray(p, dtype=float)
    return p * d.mean(p)


def gmv(d: DemandSystem, p: ArrayLike) -> np.ndarray:
    """Gross merchandise value ``sum_i p_i * lambda_i(p)``."""
    return revenues(d, p).sum(axis=-1)


def _collect_violations(
    points: np.ndarray, lam: np.ndarray, g: np.ndarray, kind: DemandKind
) -> tuple[int, list[RegularityViolation]]:
    n = points.shape[-1]
    own = np.diagonal(g, axis1=-2, axis2=-1)
    off = ~np.eye(n, dtype=bool)
    found: list[RegularityViolation] = []
    count = 0

    bad = np.argwhere(lam <= 0)
    count += len(bad)
    for row, i in bad[:MAX_REPORTED_VIOLATIONS]:
        found.append(
            RegularityViolation(kind="nonpositive_demand", seller=int(i), price=points[row].tolist(), value=lam[row, i])
        )

    bad = np.argwhere(own >= 0)
    count += len(bad)
    for row, i in bad[:MAX_REPORTED_VIOLATIONS]:
        found.append(
            RegularityViolation(
                kind="own_slope_nonnegative", seller=int(i), price=points[row].tolist(), value=own[row, i]
            )
        )

    bad = np.argwhere((g <= 0) & off)
    count += len(bad)
    for row, i, j in bad[:MAX_REPORTED_VIOLATIONS]:
        found.append(
            RegularityViolation(
                kind="cross_slope_nonpositive",
                seller=int(i),
                partner=int(j),
                price=points[row].tolist(),
                value=g[row, i, j],
            )
        )

    if kind is DemandKind.MNL:
        total = lam.sum(axis=-1)
        bad = np.argwhere((total >= 1) | np.any(lam >= 1, axis=-1))
        count += len(bad)
        for (row,) in bad[:MAX_REPORTED_VIOLATIONS]:
            found.append(
                RegularityViolation(kind="share_sum", seller=-1, price=points[row].tolist(), value=float(total[row]))
            )

    return count, found[:MAX_REPORTED_VIOLATIONS]


def scan_bounds(d: DemandSystem, box: PriceBox | None = None, grid_resolution: int | None = None) -> DemandBounds:
    """Estimate ``m0, m1, M1, M2`` on a tensor grid and check demand signs.

    Parameters
    ----------
    d : DemandSystem
        Demand to scan.
    box : PriceBox | None
        Region to scan, the demand's own box by default.
    grid_resolution : int | None
        Points per dimension; 64 for ``n <= 3``, 16 otherwise.

    Returns
    -------
    DemandBounds
        Grid extrema plus a report of every point breaking the sign conditions.
    """
    box = box or d.box
    resolution = grid_resolution if grid_resolution is not None else default_grid_resolution(d.n)
    if resolution < 2:
        raise ValueError(f"grid_resolution must be >= 2, got {resolution}")
    total = box.grid_size(resolution)
    if total > 10_000_000:
        logger.warning("Scanning %d grid points; consider a smaller grid_resolution", total)

    m0 = m1 = math.inf
    big_m1 = big_m2 = 0.0
    violation_count = 0
    violations: list[RegularityViolation] = []
    for chunk in box.iter_grid(resolution):
        lam = d._mean(chunk)
        g = d._gradient(chunk)
        h = d._hessian(chunk)
        m0 = min(m0, float(np.min(np.abs(lam))))
        m1 = min(m1, float(np.min(np.abs(np.diagonal(g, axis1=-2, axis2=-1)))))
        big_m1 = max(big_m1, float(np.max(np.abs(g))))
        big_m2 = max(big_m2, float(np.max(np.abs(h))))
        count, found = _collect_violations(chunk, lam, g, d.kind)
        violation_count += count
        violations.extend(found[: MAX_REPORTED_VIOLATIONS - len(violations)])

    if violation_count:
        logger.warning("Demand regularity fails at %d grid checks (first: %s)", violation_count, violations[0].kind)
    logger.debug("Scanned %d points: m0=%.6g m1=%.6g M1=%.6g M2=%.6g", total, m0, m1, big_m1, big_m2)
    return DemandBounds(
        m0=m0,
        m1=m1,
        M1=big_m1,
        M2=big_m2,
        grid_resolution=resolution,
        points=total,
        violation_count=violation_count,
        violations=violations,
    )


def sample_realized_demand(
    d: DemandSystem,
    noise: NoiseSpec | None,
    p: ArrayLike,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``D = lambda(p) + eps``.

    ``p`` may carry leading batch dimensions; one shock vector is drawn per
    price vector. ``noise=None`` returns mean demand.
    """
    lam = d.mean(p)
    if noise is None:
        return lam
    if noise.n != d.n:
        raise ValueError(f"noise is for {noise.n} sellers, demand has {d.n}")
    return lam + noise.sample(rng, lam.shape[:-1])


def as_price(values: Sequence[float] | np.ndarray | float, n: int, name: str = "price") -> np.ndarray:
    """Broadcast a scalar or sequence to a length-``n`` float vector."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
    return arr.copy()
