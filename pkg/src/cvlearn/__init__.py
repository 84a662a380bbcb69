"""cvlearn - conjectural-variations equilibria and batch price learning.

Solve CV and Nash equilibria of differentiated-product markets, simulate
sellers that learn demand slopes from price experiments, and measure how
fast they converge.

Examples
--------
>>> from cvlearn import LinearDemand, PriceBox, solve_fixed_point
>>> box = PriceBox(lower=[1.0, 1.0], upper=[9.0, 9.0])
>>> d = LinearDemand(a=[100.0, 100.0], b=[[10.0, 4.0], [4.0, 10.0]], box=box)
>>> [round(x, 6) for x in solve_fixed_point(d, None, 0.5).price]
[6.25, 6.25]
"""

from importlib.metadata import version

from cvlearn.demand import (
    DEFAULT_GRID_RESOLUTION_LARGE,
    DEFAULT_GRID_RESOLUTION_SMALL,
    DemandSystem,
    DemandValidationError,
    LinearDemand,
    MnlDemand,
    NoiseSpec,
    PriceBox,
    PriceDomainError,
    demand_gradient,
    demand_hessian,
    demand_hessian_row,
    gmv,
    mean_demand,
    revenues,
    sample_realized_demand,
    scan_bounds,
)
from cvlearn.design import (
    ConjectureMatrix,
    DesignSchedule,
    DesignValidationError,
    EmpiricalDesign,
    ExperimentDesign,
    UndefinedConditionalError,
    as_conjecture,
    build_design,
    conjecture_matrix,
    empirical_conjecture,
    empirical_joint,
    outcome_matrix,
    sample_period,
    sample_periods,
)
from cvlearn.equilibrium import (
    DEFAULT_FOC_TOLERANCE,
    DEFAULT_MAP_TOLERANCE,
    DEFAULT_MAX_ITER,
    AssumptionViolationError,
    ConjectureSweep,
    ContractionError,
    CvCoefficients,
    NonConvergenceError,
    SingularSystemError,
    SolverConfig,
    UnsupportedDecompositionError,
    admissible_growth,
    contraction_report,
    cv_coefficients,
    decompose_jacobian,
    f_map,
    foc_residual,
    foc_sufficiency_certified,
    get_default_config,
    gmv_optimize,
    jacobian_z,
    linear_cv_closed_form,
    set_default_config,
    solve_cv_equilibrium,
    solve_fixed_point,
    strategic_complements,
    sweep_conjecture,
    z_map,
)
from cvlearn.harness import (
    CorrelationSweep,
    ExperimentPlan,
    InsufficientPointsError,
    ReplicationStats,
    TargetResolutionError,
    correlation_sweep,
    fit_rate,
    resolve_target,
    run_replications,
)
from cvlearn.models import (
    BatchScheduleKind,
    ClosedFormSolution,
    ContractionReport,
    DeltaScheduleKind,
    DemandBounds,
    DemandKind,
    DesignKind,
    FixedPointResult,
    JacobianMethod,
    NoiseKind,
    OutputFormat,
    RateFit,
    RegularityViolation,
    TargetKind,
)
from cvlearn.plan import PlanFile, PlanValidationError, build_experiment_plan, load_plan
from cvlearn.sldl import (
    BatchRecord,
    BatchSchedule,
    BatchState,
    DeltaSchedule,
    SimulationTrace,
    SldlConfig,
    SldlConfigError,
    ols_two_point,
    run_batch,
    run_sldl,
    scaling_diagnostic,
)

__version__ = version("cvlearn")
__all__ = [
    # Version
    "__version__",
    # Demand
    "DEFAULT_GRID_RESOLUTION_LARGE",
    "DEFAULT_GRID_RESOLUTION_SMALL",
    "DemandSystem",
    "LinearDemand",
    "MnlDemand",
    "NoiseSpec",
    "PriceBox",
    "DemandValidationError",
    "PriceDomainError",
    "mean_demand",
    "demand_gradient",
    "demand_hessian",
    "demand_hessian_row",
    "revenues",
    "gmv",
    "sample_realized_demand",
    "scan_bounds",
    # Design
    "ExperimentDesign",
    "EmpiricalDesign",
    "ConjectureMatrix",
    "DesignSchedule",
    "DesignValidationError",
    "UndefinedConditionalError",
    "as_conjecture",
    "build_design",
    "conjecture_matrix",
    "empirical_joint",
    "empirical_conjecture",
    "outcome_matrix",
    "sample_period",
    "sample_periods",
    # Equilibrium
    "DEFAULT_FOC_TOLERANCE",
    "DEFAULT_MAP_TOLERANCE",
    "DEFAULT_MAX_ITER",
    "SolverConfig",
    "get_default_config",
    "set_default_config",
    "CvCoefficients",
    "ConjectureSweep",
    "AssumptionViolationError",
    "ContractionError",
    "NonConvergenceError",
    "SingularSystemError",
    "UnsupportedDecompositionError",
    "cv_coefficients",
    "z_map",
    "f_map",
    "foc_residual",
    "foc_sufficiency_certified",
    "solve_fixed_point",
    "solve_cv_equilibrium",
    "linear_cv_closed_form",
    "jacobian_z",
    "decompose_jacobian",
    "contraction_report",
    "admissible_growth",
    "strategic_complements",
    "gmv_optimize",
    "sweep_conjecture",
    # Learning
    "BatchSchedule",
    "DeltaSchedule",
    "SldlConfig",
    "SldlConfigError",
    "BatchState",
    "BatchRecord",
    "SimulationTrace",
    "ols_two_point",
    "run_batch",
    "run_sldl",
    "scaling_diagnostic",
    # Harness
    "ExperimentPlan",
    "ReplicationStats",
    "CorrelationSweep",
    "TargetResolutionError",
    "InsufficientPointsError",
    "resolve_target",
    "run_replications",
    "fit_rate",
    "correlation_sweep",
    # Plans
    "PlanFile",
    "PlanValidationError",
    "load_plan",
    "build_experiment_plan",
    # Models
    "DemandKind",
    "NoiseKind",
    "DesignKind",
    "JacobianMethod",
    "BatchScheduleKind",
    "DeltaScheduleKind",
    "TargetKind",
    "OutputFormat",
    "RegularityViolation",
    "DemandBounds",
    "FixedPointResult",
    "ClosedFormSolution",
    "ContractionReport",
    "RateFit",
]
