"""Conjectural-variations equilibria: coefficient maps, fixed-point solver,
Jacobian analysis, closed forms, GMV benchmark and comparative statics.

For a conjecture matrix ``A`` seller i's CV slope and intercept at ``p`` are

    beta_i  = -(d_i lambda_i + sum_j A_ij d_j lambda_i)
    alpha_i = lambda_i + beta_i p_i

and its misspecified-monopoly target is ``z_i = alpha_i / (2 beta_i)``. The
damped update ``F(p) = proj((I - U) p + U z(p))`` is what the learning
dynamics converge to in the noiseless limit.

Examples
--------
>>> from cvlearn.demand import LinearDemand, PriceBox
>>> from cvlearn.equilibrium import solve_fixed_point
>>> box = PriceBox(lower=[1.0, 1.0], upper=[9.0, 9.0])
>>> d = LinearDemand(a=[100.0, 100.0], b=[[10.0, 4.0], [4.0, 10.0]], box=box)
>>> [round(x, 8) for x in solve_fixed_point(d, None, 0.5).price]
[6.25, 6.25]
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import polars as pl
from numpy.typing import ArrayLike
from scipy.optimize import minimize_scalar

from cvlearn.demand import (
    DemandSystem,
    LinearDemand,
    MnlDemand,
    PriceBox,
    as_price,
    default_grid_resolution,
    gmv,
)
from cvlearn.design import ConjectureMatrix, as_conjecture
from cvlearn.models import ClosedFormSolution, ContractionReport, FixedPointResult, JacobianMethod

logger = logging.getLogger(__name__)

# Solver tolerances
DEFAULT_MAP_TOLERANCE = 1e-10
DEFAULT_FOC_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 100_000
DEFAULT_BOUNDARY_TOLERANCE = 1e-9

# Contraction scan: full grid up to this dimension, Latin hypercube above
GRID_SCAN_MAX_DIMENSION = 2
DEFAULT_CONTRACTION_SAMPLES = 4096

DEFAULT_FD_STEP = 1e-5

# GMV search
DEFAULT_GMV_REFINE_ITERS = 50
GMV_TOLERANCE = 1e-10

# Ties along comparative-statics paths
MONOTONE_TOLERANCE = 1e-9

# Largest admissible market share for the symmetric logit contraction bound
MNL_SHARE_BOUND = 0.6

SINGULAR_CONDITION = 1e12


class AssumptionViolationError(ValueError):
    """Raised when a CV slope ``beta_i`` is not strictly positive.

    The target map ``alpha / (2 beta)`` is undefined there. Either the
    conjecture matrix is too large relative to own-price sensitivity or the
    price point lies where demand is too flat.
    """

    def __init__(self, seller: int, price: ArrayLike, beta: float):
        price_list = np.asarray(price, dtype=float).tolist()
        super().__init__(f"CV slope of seller {seller} is {beta:.6g} <= 0 at price {price_list}")
        self.seller = seller
        self.price = price_list
        self.beta = beta


class ContractionError(ValueError):
    """Raised when the solver precondition ``sup ||Dz||_inf < 1`` fails.

    Pass ``force=True`` to iterate anyway.
    """

    def __init__(self, report: ContractionReport):
        super().__init__(f"target map is not certified as a contraction: {report.verdict()}")
        self.report = report


class NonConvergenceError(RuntimeError):
    """Raised when the damped iteration exhausts ``max_iter``.

    The last iterate and its residuals are available as ``result``.
    """

    def __init__(self, result: FixedPointResult):
        super().__init__(
            f"fixed-point iteration did not converge after {result.iterations} iterations "
            f"(last step {result.residual_map:.3g})"
        )
        self.result = result


class SingularSystemError(ValueError):
    """Raised when the linear first-order system has no unique solution."""


class UnsupportedDecompositionError(ValueError):
    """Raised when the competition/curvature split is requested for a nonzero conjecture."""


@dataclass
class SolverConfig:
    """Numerical settings for equilibrium computations.

    Attributes
    ----------
    map_tolerance : float
        Stop when ``||F(p) - p||_inf`` falls below this (default: 1e-10).
    foc_tolerance : float
        Absolute first-order residual for an interior certificate (default: 1e-8).
    max_iter : int
        Iteration cap (default: 100000).
    boundary_tolerance : float
        Distance to a box face that counts as on the boundary (default: 1e-9).
    grid_resolution : int | None
        Points per dimension for contraction scans; 64 when ``None``.
    sample_count : int
        Latin-hypercube points for contraction scans above two sellers.
    seed : int
        Seed for the Latin-hypercube sampler.

    Examples
    --------
    >>> config = SolverConfig(map_tolerance=1e-12)
    >>> config = SolverConfig(max_iter=1_000, grid_resolution=16)
    """

    map_tolerance: float = DEFAULT_MAP_TOLERANCE
    foc_tolerance: float = DEFAULT_FOC_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER
    boundary_tolerance: float = DEFAULT_BOUNDARY_TOLERANCE
    grid_resolution: int | None = None
    sample_count: int = DEFAULT_CONTRACTION_SAMPLES
    seed: int = 0


# Global default configuration
_default_config: SolverConfig = SolverConfig()


def get_default_config() -> SolverConfig:
    """Get the current default solver configuration."""
    return _default_config


def set_default_config(config: SolverConfig) -> None:
    """Set the default solver configuration globally.

    Parameters
    ----------
    config : SolverConfig
        The configuration to use as default.

    Examples
    --------
    >>> set_default_config(SolverConfig(map_tolerance=1e-12))
    """
    global _default_config
    _default_config = config


@dataclass(frozen=True, eq=False)
class CvCoefficients:
    """CV slopes ``beta`` and intercepts ``alpha`` at one price vector."""

    beta: np.ndarray
    alpha: np.ndarray

    @property
    def target(self) -> np.ndarray:
        return self.alpha / (2.0 * self.beta)


def _entries(A: ConjectureMatrix | ArrayLike | float | None, n: int) -> np.ndarray:
    return as_conjecture(A, n).entries


def _learning_rate(u: ArrayLike, n: int) -> np.ndarray:
    rate = as_price(u, n, name="u")
    if np.any(rate <= 0) or np.any(rate >= 1):
        raise ValueError(f"learning rates must lie strictly inside (0, 1), got {rate.tolist()}")
    return rate


def _beta(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    own = np.diagonal(g, axis1=-2, axis2=-1)
    return -(own + (a * g).sum(axis=-1))


def _first_violation(beta: np.ndarray, p: np.ndarray) -> AssumptionViolationError | None:
    bad = np.argwhere(beta <= 0)
    if not bad.size:
        return None
    idx = tuple(bad[0])
    return AssumptionViolationError(int(idx[-1]), p[idx[:-1]], float(beta[idx]))


def cv_coefficients(
    d: DemandSystem, A: ConjectureMatrix | ArrayLike | float | None, p: ArrayLike
) -> CvCoefficients:
    """CV slope and intercept of every seller at ``p``.

    Raises
    ------
    AssumptionViolationError
        If some ``beta_i <= 0``; the error names the seller and price.
    """
    p = d.check_domain(p)
    a = _entries(A, d.n)
    lam = d._mean(p)
    beta = _beta(d._gradient(p), a)
    err = _first_violation(beta, p)
    if err is not None:
        raise err
    return CvCoefficients(beta=beta, alpha=lam + beta * p)


def z_map(d: DemandSystem, A: ConjectureMatrix | ArrayLike | float | None, p: ArrayLike) -> np.ndarray:
    """Target prices ``alpha / (2 beta)``."""
    return cv_coefficients(d, A, p).target


def foc_residual(d: DemandSystem, A: ConjectureMatrix | ArrayLike | float | None, p: ArrayLike) -> np.ndarray:
    """CV first-order residual ``lambda_i + p_i (d_i lambda_i + sum_j A_ij d_j lambda_i)``.

    Zero at interior CV equilibria. Equals ``2 beta (z - p)``.
    """
    p = d.check_domain(p)
    a = _entries(A, d.n)
    return d._mean(p) - p * _beta(d._gradient(p), a)


def f_map(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    p: ArrayLike,
    u: ArrayLike,
    box: PriceBox | None = None,
) -> np.ndarray:
    """Damped, projected update ``proj_box((1 - u) p + u z(p))``."""
    box = box or d.box
    rate = _learning_rate(u, d.n)
    p = np.asarray(p, dtype=float)
    return box.project((1.0 - rate) * p + rate * z_map(d, A, p))


def foc_sufficiency_certified(d: DemandSystem) -> bool:
    """Whether the demand family is known to make the first-order condition sufficient."""
    return isinstance(d, (LinearDemand, MnlDemand))


def _result(
    d: DemandSystem,
    a: np.ndarray,
    p: np.ndarray,
    iterations: int,
    residual: float,
    box: PriceBox,
    config: SolverConfig,
    converged: bool,
) -> FixedPointResult:
    foc = d._mean(p) - p * _beta(d._gradient(p), a)
    tol = config.boundary_tolerance * np.maximum(1.0, box.upper)
    boundary = (p <= box.lower + tol) | (p >= box.upper - tol)
    interior = converged and not bool(np.any(boundary)) and float(np.max(np.abs(foc))) <= config.foc_tolerance
    return FixedPointResult(
        price=p.tolist(),
        iterations=iterations,
        residual_map=residual,
        residual_foc=foc.tolist(),
        boundary_flags=boundary.tolist(),
        certified_interior=interior,
        optimality_certified=interior and foc_sufficiency_certified(d),
        converged=converged,
    )


def solve_fixed_point(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    u: ArrayLike,
    box: PriceBox | None = None,
    init: ArrayLike | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    *,
    force: bool = False,
    report: ContractionReport | None = None,
    config: SolverConfig | None = None,
) -> FixedPointResult:
    """Iterate the damped update map to its fixed point.

    Parameters
    ----------
    d : DemandSystem
        Market demand.
    A : ConjectureMatrix | array_like | float | None
        Conjecture matrix; ``None`` is the Nash case, a scalar fills all
        off-diagonal entries.
    u : array_like
        Learning rates in (0, 1), scalar or per seller.
    box : PriceBox | None
        Projection box, the demand's own by default.
    init : array_like | None
        Starting point, the box center by default.
    tol, max_iter : float | None, int | None
        Override the configured map tolerance and iteration cap.
    force : bool
        Skip the contraction precondition.
    report : ContractionReport | None
        Precomputed contraction report to reuse.

    Returns
    -------
    FixedPointResult
        On success. Boundary fixed points are returned with
        ``certified_interior=False``.

    Raises
    ------
    ContractionError
        If the map is not certified as a contraction and ``force`` is False.
    NonConvergenceError
        If ``max_iter`` is exhausted.
    AssumptionViolationError
        If an iterate reaches a non-positive CV slope.
    """
    config = config or get_default_config()
    box = box or d.box
    tol = config.map_tolerance if tol is None else tol
    max_iter = config.max_iter if max_iter is None else max_iter
    a = _entries(A, d.n)
    rate = _learning_rate(u, d.n)

    if not force:
        report = report or contraction_report(d, A, rate, box, config=config)
        if not report.satisfied:
            raise ContractionError(report)

    p = box.project(box.center if init is None else as_price(init, d.n, name="init"))
    step = math.inf
    for iteration in range(1, max_iter + 1):
        p_next = f_map(d, a, p, rate, box)
        step = float(np.max(np.abs(p_next - p)))
        p = p_next
        if step <= tol:
            residual = float(np.max(np.abs(f_map(d, a, p, rate, box) - p)))
            result = _result(d, a, p, iteration, residual, box, config, converged=True)
            if any(result.boundary_flags):
                logger.warning("Fixed point %s lies on the box boundary; not FOC-certified", result.price)
            else:
                logger.debug("Converged in %d iterations to %s", iteration, result.price)
            return result

    result = _result(d, a, p, max_iter, step, box, config, converged=False)
    logger.error("Fixed-point iteration stalled at step %.3g after %d iterations", step, max_iter)
    raise NonConvergenceError(result)


def linear_cv_closed_form(
    d: LinearDemand, A: ConjectureMatrix | ArrayLike | float | None, box: PriceBox | None = None
) -> ClosedFormSolution:
    """Solve the linear-demand CV first-order system directly.

    The system is ``M p = a`` with ``M_ii = 2 b_ii - sum_j A_ij b_ij`` and
    ``M_ij = -b_ij``.

    Raises
    ------
    SingularSystemError
        If ``M`` is singular or numerically so.
    TypeError
        If ``d`` is not linear.
    """
    if not isinstance(d, LinearDemand):
        raise TypeError(f"closed form needs linear demand, got {type(d).__name__}")
    box = box or d.box
    a = _entries(A, d.n)
    cross = d.cross
    system = np.diag(2.0 * d.own - (a * cross).sum(axis=1)) - cross
    cond = float(np.linalg.cond(system))
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SingularSystemError(f"linear CV system is singular (condition number {cond:.3g})")
    try:
        price = np.linalg.solve(system, d.a)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(str(e)) from e
    inside = box.contains(price)
    if not inside:
        logger.warning("Closed-form CV prices %s fall outside the box", price.tolist())
    return ClosedFormSolution(price=price.tolist(), inside_box=inside, condition_number=cond)


def _jacobian_analytic(d: DemandSystem, a: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised Jacobian of ``z`` plus the pieces it is built from.

    Returns ``(Dz, L_comp_raw, L_curv)`` where ``L_comp_raw[i, j] = g_ij / (2 beta_i)``.
    """
    lam = d._mean(p)
    g = d._gradient(p)
    h = d._hessian(p)
    beta = _beta(g, a)
    err = _first_violation(beta, p)
    if err is not None:
        raise err
    h_own = np.diagonal(h, axis1=-3, axis2=-2)  # [..., j, i] = H[i, i, j]
    h_own = np.swapaxes(h_own, -1, -2)
    dbeta = -(h_own + np.einsum("...ik,...ikj->...ij", np.broadcast_to(a, g.shape), h))
    comp = g / (2.0 * beta[..., :, None])
    curv = -lam[..., :, None] * dbeta / (2.0 * beta[..., :, None] ** 2)
    jac = 0.5 * np.eye(d.n) + comp + curv
    return jac, comp, curv


def _z_unchecked(d: DemandSystem, a: np.ndarray, p: np.ndarray) -> np.ndarray:
    lam = d._mean(p)
    beta = _beta(d._gradient(p), a)
    return p / 2.0 + lam / (2.0 * beta)


def jacobian_z(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    p: ArrayLike,
    method: JacobianMethod | str = JacobianMethod.ANALYTIC,
    step: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Jacobian of the target map, entry ``[i, j] = d z_i / d p_j``.

    The analytic form uses demand second derivatives and holds for any
    conjecture matrix. ``FINITE_DIFFERENCE`` uses central differences with a
    step of ``step * max(1, |p_j|)``.
    """
    p = d.check_domain(p)
    a = _entries(A, d.n)
    if JacobianMethod(method) is JacobianMethod.ANALYTIC:
        return _jacobian_analytic(d, a, p)[0]
    jac = np.empty((d.n, d.n))
    for j in range(d.n):
        h = step * max(1.0, abs(p[j]))
        e = np.zeros(d.n)
        e[j] = h
        jac[:, j] = (_z_unchecked(d, a, p + e) - _z_unchecked(d, a, p - e)) / (2.0 * h)
    return jac


def decompose_jacobian(
    d: DemandSystem, A: ConjectureMatrix | ArrayLike | float | None, p: ArrayLike
) -> tuple[np.ndarray, np.ndarray]:
    """Split the Nash-case Jacobian into competition and curvature parts.

    ``L_comp`` has zero diagonal and entries ``d_j lambda_i / (2 beta_i)``;
    ``L_curv = -lambda_i d_j beta_i / (2 beta_i^2)``. Their sum is ``Dz``.

    Raises
    ------
    UnsupportedDecompositionError
        If ``A`` is not the zero matrix.
    """
    a = _entries(A, d.n)
    if np.any(a):
        raise UnsupportedDecompositionError("the competition/curvature split is defined for A = 0 only")
    p = d.check_domain(p)
    _, comp, curv = _jacobian_analytic(d, a, p)
    comp = comp.copy()
    np.fill_diagonal(comp, 0.0)
    return comp, curv


def _scan_points(box: PriceBox, config: SolverConfig) -> np.ndarray:
    if box.n <= GRID_SCAN_MAX_DIMENSION:
        resolution = config.grid_resolution or default_grid_resolution(box.n)
        return box.grid(resolution)
    return box.sample(config.sample_count, seed=config.seed)


def contraction_report(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    u: ArrayLike,
    box: PriceBox | None = None,
    grid_resolution: int | None = None,
    *,
    query_point: ArrayLike | None = None,
    config: SolverConfig | None = None,
) -> ContractionReport:
    """Estimate ``sup ||Dz||_inf`` over the box and the update map's modulus.

    The sup is taken over a ``grid_resolution ** n`` grid for up to two
    sellers and over a Latin-hypercube sample otherwise. Linear markets with
    a nonnegative conjecture also get the exact row condition
    ``sum_j (1 + 3 A_ij) b_ij < 2 b_ii``; symmetric logit markets in the
    Nash case get the market-share bound ``max lambda_i < 3/5``.
    """
    config = config or get_default_config()
    if grid_resolution is not None:
        config = replace(config, grid_resolution=grid_resolution)
    box = box or d.box
    cm = as_conjecture(A, d.n)
    a = cm.entries
    rate = _learning_rate(u, d.n)
    points = _scan_points(box, config)

    beta = _beta(d._gradient(points), a)
    min_beta = float(np.min(beta))
    slope_positive = min_beta > 0
    if slope_positive:
        jac = _jacobian_analytic(d, a, points)[0]
        norm_sup = float(np.max(np.abs(jac).sum(axis=-1)))
    else:
        norm_sup = math.inf
    gamma = float(np.max(1.0 - rate + rate * norm_sup))

    query = box.center if query_point is None else d.check_domain(query_point)
    jac_q = comp_q = curv_q = None
    if slope_positive:
        jac_q = jacobian_z(d, a, query).tolist()
        if cm.is_zero:
            comp, curv = decompose_jacobian(d, a, query)
            comp_q, curv_q = comp.tolist(), curv.tolist()

    sufficient_linear = None
    if isinstance(d, LinearDemand) and cm.is_nonnegative:
        cross = d.cross
        sufficient_linear = bool(np.all(((1.0 + 3.0 * a) * cross).sum(axis=1) < 2.0 * d.own))

    sufficient_mnl = None
    max_share = None
    if isinstance(d, MnlDemand):
        max_share = float(np.max(d._mean(points)))
        if d.symmetric and cm.is_zero:
            sufficient_mnl = max_share < MNL_SHARE_BOUND

    report = ContractionReport(
        norm_sup=norm_sup,
        gamma=gamma,
        satisfied=slope_positive and norm_sup < 1.0,
        slope_positive=slope_positive,
        min_beta=min_beta,
        points=int(points.shape[0]),
        query_point=query.tolist(),
        jacobian=jac_q,
        L_comp=comp_q,
        L_curv=curv_q,
        sufficient_linear=sufficient_linear,
        sufficient_mnl=sufficient_mnl,
        max_share=max_share,
    )
    logger.debug("Contraction scan over %d points: %s, gamma=%.6g", report.points, report.verdict(), gamma)
    return report


def admissible_growth(gamma: float) -> float:
    """Largest batch growth factor compatible with contraction modulus ``gamma``: ``gamma ** -4``."""
    if gamma <= 0:
        return math.inf
    return gamma**-4.0


def strategic_complements(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    box: PriceBox | None = None,
    grid_resolution: int | None = None,
) -> bool:
    """Check the comparative-statics hypotheses on a grid.

    Requires ``d G_i / d p_j >= 0`` for ``j != i`` where ``G`` is the CV
    first-order residual, ``G_i > 0`` on seller i's lower face and ``G_i < 0``
    on its upper face.
    """
    box = box or d.box
    a = _entries(A, d.n)
    resolution = grid_resolution or min(default_grid_resolution(d.n), 16)
    points = box.grid(resolution)
    lam = d._mean(points)
    g = d._gradient(points)
    h = d._hessian(points)
    beta = _beta(g, a)
    h_own = np.swapaxes(np.diagonal(h, axis1=-3, axis2=-2), -1, -2)
    dbeta = -(h_own + np.einsum("...ik,...ikj->...ij", np.broadcast_to(a, g.shape), h))
    dG = g - np.eye(d.n) * beta[..., :, None] - points[..., :, None] * dbeta
    off = ~np.eye(d.n, dtype=bool)
    if np.any(dG[:, off] < -1e-12):
        return False
    foc = lam - points * beta
    on_lower = np.isclose(points, box.lower)
    on_upper = np.isclose(points, box.upper)
    return bool(np.all(foc[on_lower] > 0) and np.all(foc[on_upper] < 0))


def solve_cv_equilibrium(
    d: DemandSystem,
    A: ConjectureMatrix | ArrayLike | float | None,
    u: ArrayLike,
    box: PriceBox | None = None,
    *,
    report: ContractionReport | None = None,
    config: SolverConfig | None = None,
) -> FixedPointResult:
    """Solve for CV(A) prices, falling back to the closed form for linear markets.

    The fallback applies when the contraction scan fails but the linear
    system has an interior solution. A precomputed ``report`` skips the scan.
    """
    box = box or d.box
    try:
        return solve_fixed_point(d, A, u, box, report=report, config=config)
    except ContractionError:
        if not isinstance(d, LinearDemand):
            raise
        solution = linear_cv_closed_form(d, A, box)
        if not solution.inside_box:
            raise
        logger.info("Contraction not certified; using interior closed-form solution")
        config = config or get_default_config()
        price = solution.price_array
        return _result(d, _entries(A, d.n), price, 0, 0.0, box, config, converged=True)


def gmv_optimize(
    d: DemandSystem,
    box: PriceBox | None = None,
    grid_resolution: int | None = None,
    refine_iters: int = DEFAULT_GMV_REFINE_ITERS,
) -> np.ndarray:
    """Maximise ``sum_i p_i lambda_i(p)`` over the box.

    A coarse grid search picks the start, then coordinate-wise bounded
    scalar searches refine it until a sweep moves no coordinate by more
    than 1e-10 or ``refine_iters`` sweeps have run.
    """
    box = box or d.box
    resolution = grid_resolution or default_grid_resolution(d.n)
    best = None
    best_value = -math.inf
    for chunk in box.iter_grid(resolution):
        values = gmv(d, chunk)
        idx = int(np.argmax(values))
        if values[idx] > best_value:
            best_value = float(values[idx])
            best = chunk[idx].copy()
    assert best is not None

    p = best
    for sweep in range(refine_iters):
        moved = 0.0
        for i in range(d.n):

            def objective(x: float, i: int = i) -> float:
                trial = p.copy()
                trial[i] = x
                return -float(gmv(d, trial))

            res = minimize_scalar(
                objective,
                bounds=(float(box.lower[i]), float(box.upper[i])),
                method="bounded",
                options={"xatol": GMV_TOLERANCE},
            )
            candidate = float(res.x)
            if -res.fun >= -objective(p[i]):
                moved = max(moved, abs(candidate - p[i]))
                p[i] = candidate
        if moved <= GMV_TOLERANCE:
            logger.debug("GMV refinement settled after %d sweeps", sweep + 1)
            break
    return p


@dataclass
class SweepPoint:
    """One conjecture on a comparative-statics path."""

    index: int
    conjecture: ConjectureMatrix
    result: FixedPointResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass
class ConjectureSweep:
    """Equilibria along a path of conjecture matrices."""

    points: list[SweepPoint] = field(default_factory=list)
    tolerance: float = MONOTONE_TOLERANCE

    @property
    def results(self) -> list[FixedPointResult | None]:
        return [pt.result for pt in self.points]

    @property
    def prices(self) -> np.ndarray:
        """Solved prices, NaN rows for failed points."""
        n = self.points[0].conjecture.n if self.points else 0
        return np.array([pt.result.price if pt.result else [np.nan] * n for pt in self.points])

    @property
    def monotone(self) -> bool | None:
        """Componentwise nondecreasing prices along the path, ``None`` if any point failed."""
        if not all(pt.ok for pt in self.points):
            return None
        return bool(np.all(np.diff(self.prices, axis=0) >= -self.tolerance))

    def to_frame(self) -> pl.DataFrame:
        rows: list[dict[str, Any]] = []
        for pt in self.points:
            row: dict[str, Any] = {"path_index": pt.index}
            n = pt.conjecture.n
            for i in range(n):
                for j in range(n):
                    if i != j:
                        row[f"A_{i + 1}{j + 1}"] = float(pt.conjecture.entries[i, j])
            for i in range(n):
                row[f"p_{i + 1}"] = pt.result.price[i] if pt.result else None
            row["residual_map"] = pt.result.residual_map if pt.result else None
            row["max_abs_foc"] = pt.result.max_abs_foc if pt.result else None
            row["iterations"] = pt.result.iterations if pt.result else None
            row["certified_interior"] = pt.result.certified_interior if pt.result else None
            row["error"] = pt.error
            rows.append(row)
        return pl.DataFrame(rows)


def sweep_conjecture(
    d: DemandSystem,
    u: ArrayLike,
    box: PriceBox | None,
    A_path: Sequence[ConjectureMatrix | ArrayLike | float],
    *,
    config: SolverConfig | None = None,
) -> ConjectureSweep:
    """Solve CV equilibria along a path of conjecture matrices.

    Failures are recorded on the point and the sweep continues.
    """
    box = box or d.box
    sweep = ConjectureSweep()
    for index, A in enumerate(A_path):
        cm = as_conjecture(A, d.n)
        point = SweepPoint(index=index, conjecture=cm)
        try:
            point.result = solve_cv_equilibrium(d, cm, u, box, config=config)
        except (ContractionError, NonConvergenceError, AssumptionViolationError, SingularSystemError) as e:
            logger.warning("Sweep point %d failed: %s", index, e)
            point.error = str(e)
        sweep.points.append(point)
    if sweep.monotone is False:
        logger.warning("Equilibrium prices are not monotone along the conjecture path")
    return sweep
