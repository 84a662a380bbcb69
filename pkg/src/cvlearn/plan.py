"""Experiment-plan files: schema, loading, overrides and runtime objects.

Plans are YAML documents. Unknown keys are rejected and every error names
the offending field as a dotted path such as ``design.table``.

Examples
--------
>>> from cvlearn.plan import load_plan, build_experiment_plan
>>> plan = load_plan("plans/independent_nash.yaml")
>>> experiment = build_experiment_plan(plan)
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from cvlearn.demand import (
    DemandSystem,
    DemandValidationError,
    LinearDemand,
    MnlDemand,
    NoiseSpec,
    PriceBox,
    scan_bounds,
)
from cvlearn.design import (
    ConjectureMatrix,
    DesignSchedule,
    DesignValidationError,
    ExperimentDesign,
    as_conjecture,
    build_design,
    conjecture_matrix,
)
from cvlearn.equilibrium import SolverConfig, admissible_growth
from cvlearn.harness import DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_TAIL_FRACTION, ExperimentPlan
from cvlearn.models import (
    BatchScheduleKind,
    ContractionReport,
    DeltaScheduleKind,
    DemandKind,
    DesignKind,
    NoiseKind,
    OutputFormat,
    TargetKind,
)
from cvlearn.sldl import BatchSchedule, DeltaSchedule, SldlConfig, SldlConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class PlanValidationError(ValueError):
    """Raised when a plan file is malformed or inconsistent.

    Attributes
    ----------
    path : str
        Dotted location of the offending field, e.g. ``design.table``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BoxSection(_Section):
    lower: list[float]
    upper: list[float]


class DemandSection(_Section):
    kind: DemandKind
    a: list[float]
    b: list[list[float]] | list[float]


class NoiseSection(_Section):
    kind: NoiseKind = NoiseKind.BOUNDED_UNIFORM
    sigma: list[float] | float | None = None
    fraction_of_m0: float = Field(default=1.0, gt=0, le=1)
    correlation: list[list[float]] | None = None


class DesignSection(_Section):
    kind: DesignKind
    q: list[float] | float | None = None
    rho: float | None = None
    table: dict[str, float] | None = None
    allow_degenerate: bool = False


class DesignSweepSection(_Section):
    rho: list[float] = Field(min_length=1)
    q: float = 0.5
    simulate: bool = True


class BatchSection(_Section):
    kind: BatchScheduleKind = BatchScheduleKind.GEOMETRIC
    initial: int | None = None
    growth: float | None = None
    count: int | None = None
    lengths: list[int] | None = None
    horizon: int | None = None


class DeltaSection(_Section):
    kind: DeltaScheduleKind = DeltaScheduleKind.LOG_QUARTIC
    scale: float = 1.0
    exponent: float | None = None
    values: list[list[float]] | list[float] | None = None


class SldlSection(_Section):
    u: list[float] | float = 0.5
    initial_price: list[float] | None = None
    batches: BatchSection
    delta: DeltaSection = Field(default_factory=DeltaSection)
    slope_tolerance: float = 1e-8
    seed: int = 0
    log_periods: bool = False


class EquilibriumSection(_Section):
    conjecture: list[list[float]] | float | None = None
    conjecture_path: list[list[list[float]] | float] | None = None
    u: list[float] | float | None = None
    map_tolerance: float | None = None
    foc_tolerance: float | None = None
    max_iter: int | None = None
    grid_resolution: int | None = None
    gmv_grid_resolution: int | None = None
    gmv_refine_iters: int = 50


class HarnessSection(_Section):
    replications: int = Field(default=1, ge=1)
    target: TargetKind = TargetKind.NASH
    target_price: list[float] | None = None
    tail_fraction: float = Field(default=DEFAULT_TAIL_FRACTION, gt=0, le=1)
    bootstrap_resamples: int = Field(default=DEFAULT_BOOTSTRAP_RESAMPLES, ge=1)
    n_jobs: int = 1


class OutputsSection(_Section):
    out_dir: str = "results"
    format: OutputFormat = OutputFormat.CSV


class PlanFile(_Section):
    """Top-level plan document."""

    schema_version: Literal[1]
    name: str | None = None
    box: BoxSection
    demand: DemandSection
    noise: NoiseSection | None = None
    design: DesignSection | None = None
    design_sweep: DesignSweepSection | None = None
    sldl: SldlSection | None = None
    equilibrium: EquilibriumSection = Field(default_factory=EquilibriumSection)
    harness: HarnessSection = Field(default_factory=HarnessSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)

    @property
    def n(self) -> int:
        return len(self.box.lower)


def _check_length(path: str, values: Any, n: int) -> None:
    if values is None or isinstance(values, (int, float)):
        return
    if len(values) != n:
        raise PlanValidationError(path, f"expected {n} entries, got {len(values)}")


def _check_square(path: str, values: Any, n: int) -> None:
    if values is None or isinstance(values, (int, float)):
        return
    if len(values) != n or any(len(row) != n for row in values):
        raise PlanValidationError(path, f"expected a {n}x{n} matrix")


def validate_plan(plan: PlanFile) -> PlanFile:
    """Cross-section consistency checks; every section must agree on ``n``."""
    n = plan.n
    _check_length("box.upper", plan.box.upper, n)
    _check_length("demand.a", plan.demand.a, n)
    if plan.demand.kind is DemandKind.LINEAR:
        _check_square("demand.b", plan.demand.b, n)
    else:
        if plan.demand.b and isinstance(plan.demand.b[0], list):
            raise PlanValidationError("demand.b", "MNL sensitivities are a vector")
        _check_length("demand.b", plan.demand.b, n)
    if plan.noise is not None:
        _check_length("noise.sigma", plan.noise.sigma, n)
        _check_square("noise.correlation", plan.noise.correlation, n)
    if plan.design is not None:
        _check_length("design.q", plan.design.q, n)
        if plan.design.kind is DesignKind.COMMON_SHOCK_MIXTURE and isinstance(plan.design.q, list):
            raise PlanValidationError("design.q", "mixture designs take one shared q")
        for key in plan.design.table or {}:
            if len(key) != n:
                raise PlanValidationError("design.table", f"outcome key {key!r} is not a {n}-bit string")
    if plan.sldl is not None:
        _check_length("sldl.u", plan.sldl.u, n)
        _check_length("sldl.initial_price", plan.sldl.initial_price, n)
    _check_square("equilibrium.conjecture", plan.equilibrium.conjecture, n)
    for idx, entry in enumerate(plan.equilibrium.conjecture_path or []):
        _check_square(f"equilibrium.conjecture_path.{idx}", entry, n)
    _check_length("equilibrium.u", plan.equilibrium.u, n)
    _check_length("harness.target_price", plan.harness.target_price, n)
    if plan.harness.target is TargetKind.EXPLICIT and plan.harness.target_price is None:
        raise PlanValidationError("harness.target_price", "explicit target requires target_price")
    if plan.harness.target is TargetKind.CV_FROM_DESIGN and plan.design is None and plan.design_sweep is None:
        raise PlanValidationError("design", "cv_from_design target requires a design section")
    return plan


def parse_plan(data: Any) -> PlanFile:
    """Validate an already-loaded plan mapping."""
    if not isinstance(data, dict):
        raise PlanValidationError("", "plan must be a mapping")
    try:
        plan = PlanFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise PlanValidationError(path, first["msg"]) from None
    return validate_plan(plan)


def load_plan(path: str | Path) -> PlanFile:
    """Read and validate a YAML plan file.

    Raises
    ------
    PlanValidationError
        On YAML syntax errors, schema violations or inconsistent dimensions.
    FileNotFoundError
        If the file does not exist.
    """
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise PlanValidationError("", f"invalid YAML: {e}") from None
    return parse_plan(data)


def apply_overrides(
    plan: PlanFile,
    *,
    seed: int | None = None,
    reps: int | None = None,
    out_dir: str | Path | None = None,
    format: OutputFormat | str | None = None,
) -> PlanFile:
    """Return a copy of ``plan`` with command-line overrides applied."""
    update: dict[str, Any] = {}
    if seed is not None:
        if plan.sldl is None:
            raise PlanValidationError("sldl.seed", "plan has no sldl section to seed")
        update["sldl"] = plan.sldl.model_copy(update={"seed": seed})
    if reps is not None:
        if reps < 1:
            raise PlanValidationError("harness.replications", "must be >= 1")
        update["harness"] = plan.harness.model_copy(update={"replications": reps})
    if out_dir is not None or format is not None:
        outputs: dict[str, Any] = {}
        if out_dir is not None:
            outputs["out_dir"] = str(out_dir)
        if format is not None:
            outputs["format"] = OutputFormat(format)
        update["outputs"] = plan.outputs.model_copy(update=outputs)
    return plan.model_copy(update=update) if update else plan


def plan_hash(plan: PlanFile) -> str:
    """SHA-256 of the canonical JSON form of a plan."""
    canonical = json.dumps(plan.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_box(plan: PlanFile) -> PriceBox:
    try:
        return PriceBox(lower=plan.box.lower, upper=plan.box.upper)
    except DemandValidationError as e:
        raise PlanValidationError("box", str(e)) from None


def build_demand(plan: PlanFile) -> DemandSystem:
    box = build_box(plan)
    section = plan.demand
    try:
        if section.kind is DemandKind.LINEAR:
            return LinearDemand(a=section.a, b=section.b, box=box)
        return MnlDemand(a=section.a, b=section.b, box=box)
    except DemandValidationError as e:
        raise PlanValidationError(f"demand.{e.field}", str(e)) from None


def build_noise(plan: PlanFile, demand: DemandSystem) -> NoiseSpec | None:
    """Noise law of a plan; bounded noise without ``sigma`` is scaled to ``m0``."""
    section = plan.noise
    if section is None:
        return None
    try:
        if section.sigma is None:
            if section.kind is not NoiseKind.BOUNDED_UNIFORM or section.correlation is not None:
                raise PlanValidationError("noise.sigma", "sigma is required for gaussian or correlated noise")
            return NoiseSpec.nonnegative(scan_bounds(demand), demand.n, fraction=section.fraction_of_m0)
        sigma = np.broadcast_to(np.asarray(section.sigma, dtype=float), (demand.n,))
        return NoiseSpec(kind=section.kind, sigma=sigma, correlation=section.correlation)
    except ValueError as e:
        if isinstance(e, PlanValidationError):
            raise
        raise PlanValidationError("noise", str(e)) from None


def build_plan_design(plan: PlanFile) -> ExperimentDesign:
    section = plan.design
    if section is None:
        raise PlanValidationError("design", "plan has no design section")
    try:
        return build_design(
            section.kind,
            n=plan.n,
            q=section.q,
            rho=section.rho,
            table=section.table,
            allow_degenerate=section.allow_degenerate,
        )
    except DesignValidationError as e:
        raise PlanValidationError(f"design.{e.field}", str(e)) from None


def build_sldl_config(plan: PlanFile) -> SldlConfig:
    section = plan.sldl
    if section is None:
        raise PlanValidationError("sldl", "plan has no sldl section")
    b = section.batches
    d = section.delta
    try:
        if b.kind is BatchScheduleKind.GEOMETRIC:
            batches = BatchSchedule(
                kind=b.kind, initial=b.initial, growth=b.growth, count=b.count, horizon=b.horizon
            )
        else:
            batches = BatchSchedule.from_lengths(b.lengths or [], horizon=b.horizon)
        if d.kind is DeltaScheduleKind.LOG_QUARTIC:
            delta = DeltaSchedule.log_quartic(scale=d.scale)
        elif d.kind is DeltaScheduleKind.POWER_LAW:
            delta = DeltaSchedule(kind=d.kind, scale=d.scale, exponent=d.exponent)
        else:
            if d.values is None:
                raise SldlConfigError("explicit delta needs values", field="delta.values")
            delta = DeltaSchedule.from_values(d.values)
        cfg = SldlConfig(
            u=section.u,
            batch_schedule=batches,
            delta_schedule=delta,
            initial_price=section.initial_price,
            slope_tolerance=section.slope_tolerance,
            seed=section.seed,
            log_periods=section.log_periods,
        )
        cfg.validate(build_box(plan))
    except SldlConfigError as e:
        raise PlanValidationError(f"sldl.{e.field}", str(e)) from None
    return cfg


def build_solver_config(plan: PlanFile) -> SolverConfig:
    section = plan.equilibrium
    config = SolverConfig()
    if section.map_tolerance is not None:
        config.map_tolerance = section.map_tolerance
    if section.foc_tolerance is not None:
        config.foc_tolerance = section.foc_tolerance
    if section.max_iter is not None:
        config.max_iter = section.max_iter
    if section.grid_resolution is not None:
        config.grid_resolution = section.grid_resolution
    return config


def solver_rates(plan: PlanFile) -> Any:
    """Learning rates used by the equilibrium solver: ``equilibrium.u``, else ``sldl.u``, else 0.5."""
    if plan.equilibrium.u is not None:
        return plan.equilibrium.u
    if plan.sldl is not None:
        return plan.sldl.u
    return 0.5


def build_conjecture(plan: PlanFile) -> ConjectureMatrix:
    """Conjecture for ``solve``: explicit entry, else the design's, else zero."""
    n = plan.n
    if plan.equilibrium.conjecture is not None:
        try:
            return as_conjecture(plan.equilibrium.conjecture, n)
        except ValueError as e:
            raise PlanValidationError("equilibrium.conjecture", str(e)) from None
    if plan.harness.target is TargetKind.CV_FROM_DESIGN and plan.design is not None:
        return conjecture_matrix(build_plan_design(plan))
    return ConjectureMatrix.zeros(n)


def build_conjecture_path(plan: PlanFile) -> list[ConjectureMatrix]:
    path = plan.equilibrium.conjecture_path
    if not path:
        raise PlanValidationError("equilibrium.conjecture_path", "sweep needs a conjecture path or design_sweep")
    out = []
    for idx, entry in enumerate(path):
        try:
            out.append(as_conjecture(entry, plan.n))
        except ValueError as e:
            raise PlanValidationError(f"equilibrium.conjecture_path.{idx}", str(e)) from None
    return out


def build_experiment_plan(plan: PlanFile, design: ExperimentDesign | None = None) -> ExperimentPlan:
    """Turn a validated plan file into runtime objects.

    ``design`` replaces the plan's design section, e.g. for correlation sweeps.
    """
    demand = build_demand(plan)
    if design is None:
        design = build_plan_design(plan)
    target_price = None if plan.harness.target_price is None else np.asarray(plan.harness.target_price)
    return ExperimentPlan(
        demand=demand,
        noise=build_noise(plan, demand),
        design=DesignSchedule.constant(design),
        sldl=build_sldl_config(plan),
        replications=plan.harness.replications,
        target=plan.harness.target,
        target_price=target_price,
        n_jobs=plan.harness.n_jobs,
        solver=build_solver_config(plan),
    )


def check_growth(plan: PlanFile, report: ContractionReport) -> bool:
    """Warn when a geometric growth factor exceeds ``gamma ** -4``.

    Returns True when the growth factor is admissible or not geometric.
    """
    if plan.sldl is None or plan.sldl.batches.kind is not BatchScheduleKind.GEOMETRIC:
        return True
    growth = plan.sldl.batches.growth or 0.0
    bound = admissible_growth(report.gamma)
    if growth > bound:
        logger.warning(
            "Batch growth %.4g exceeds the admissible bound %.4g for gamma=%.4g", growth, bound, report.gamma
        )
        return False
    return True
