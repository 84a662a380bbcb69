"""Command-line interface for cvlearn."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Annotated, Any

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from cvlearn.models import OutputFormat

if TYPE_CHECKING:
    from cvlearn.artifacts import ArtifactWriter
    from cvlearn.plan import PlanFile

app = typer.Typer(
    name="cvlearn",
    help="Conjectural-variations equilibria and batch price learning - solve, sweep and simulate experiment plans.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_RUNTIME = 4

PlanArg = Annotated[Path, typer.Argument(help="Experiment plan file (YAML)")]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Override the plan seed")]
RepsOpt = Annotated[int | None, typer.Option("--reps", help="Override the number of replications")]
OutDirOpt = Annotated[Path | None, typer.Option("--out-dir", "-o", help="Output directory")]
FormatOpt = Annotated[OutputFormat | None, typer.Option("--format", "-f", help="Table format: csv, json")]
QuietOpt = Annotated[bool, typer.Option("--quiet", "-q", help="Only log warnings and errors")]


def configure_logging(quiet: bool = False) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _seed(plan: PlanFile) -> int | None:
    return plan.sldl.seed if plan.sldl is not None else None


def _check(plan: PlanFile, writer: ArtifactWriter) -> None:
    from cvlearn.demand import scan_bounds
    from cvlearn.equilibrium import admissible_growth, contraction_report, foc_sufficiency_certified
    from cvlearn.plan import (
        build_conjecture,
        build_demand,
        build_plan_design,
        build_sldl_config,
        build_solver_config,
        check_growth,
        solver_rates,
    )

    demand = build_demand(plan)
    config = build_solver_config(plan)
    u = solver_rates(plan)
    bounds = scan_bounds(demand, grid_resolution=plan.equilibrium.grid_resolution)
    if plan.design is not None:
        build_plan_design(plan)
    if plan.sldl is not None:
        build_sldl_config(plan)

    reports = {"nash": contraction_report(demand, None, u, config=config)}
    conjecture = build_conjecture(plan)
    if not conjecture.is_zero:
        reports["cv"] = contraction_report(demand, conjecture, u, config=config)
    growth_ok = check_growth(plan, reports.get("cv", reports["nash"]))

    table = Table(title=f"Plan check: {plan.name or 'unnamed'}")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Sellers", str(demand.n))
    table.add_row("Demand", plan.demand.kind.value)
    table.add_row("m0 / m1", f"{bounds.m0:.6g} / {bounds.m1:.6g}")
    table.add_row("M1 / M2", f"{bounds.M1:.6g} / {bounds.M2:.6g}")
    table.add_row("Regular", str(bounds.regular))
    table.add_row("FOC sufficiency certified", str(foc_sufficiency_certified(demand)))
    for label, report in reports.items():
        table.add_row(f"{label} contraction", report.verdict())
        table.add_row(f"{label} gamma", f"{report.gamma:.6g}")
        table.add_row(f"{label} admissible growth", f"{admissible_growth(report.gamma):.6g}")
    table.add_row("Growth within bound", str(growth_ok))
    console.print(table)
    for report in reports.values():
        console.print(report.verdict())

    writer.write_json(
        "check.json",
        {
            "bounds": bounds.model_dump(mode="json"),
            "contraction": {label: r.model_dump(mode="json") for label, r in reports.items()},
            "growth_within_bound": growth_ok,
        },
    )


def _solve(plan: PlanFile, writer: ArtifactWriter) -> None:
    from cvlearn.demand import LinearDemand
    from cvlearn.equilibrium import (
        SingularSystemError,
        contraction_report,
        foc_sufficiency_certified,
        linear_cv_closed_form,
        solve_cv_equilibrium,
    )
    from cvlearn.plan import build_conjecture, build_demand, build_solver_config, solver_rates

    demand = build_demand(plan)
    config = build_solver_config(plan)
    u = solver_rates(plan)
    conjecture = build_conjecture(plan)
    report = contraction_report(demand, conjecture, u, config=config)
    result = solve_cv_equilibrium(demand, conjecture, u, report=report, config=config)
    payload: dict[str, Any] = {
        "conjecture": conjecture.to_list(),
        "price": result.price,
        "result": result.model_dump(mode="json"),
        "contraction": report.model_dump(mode="json"),
        "foc_sufficiency_certified": foc_sufficiency_certified(demand),
    }
    if isinstance(demand, LinearDemand):
        try:
            payload["closed_form"] = linear_cv_closed_form(demand, conjecture).model_dump(mode="json")
        except SingularSystemError as e:
            logging.getLogger(__name__).warning("No closed-form check: %s", e)
            payload["closed_form"] = None
    writer.write_json("solve.json", payload)
    console.print(report.verdict())
    console.print_json(json.dumps({"price": result.price}))


def _sweep(plan: PlanFile, writer: ArtifactWriter) -> None:
    import polars as pl

    from cvlearn.design import build_design
    from cvlearn.equilibrium import strategic_complements, sweep_conjecture
    from cvlearn.harness import correlation_sweep
    from cvlearn.models import DesignKind
    from cvlearn.plan import (
        build_box,
        build_conjecture_path,
        build_demand,
        build_experiment_plan,
        build_solver_config,
        solver_rates,
    )

    if plan.design_sweep is not None:
        section = plan.design_sweep
        base = build_design(DesignKind.COMMON_SHOCK_MIXTURE, n=plan.n, rho=section.rho[0], q=section.q)
        experiment = build_experiment_plan(plan, design=base)
        result = correlation_sweep(experiment, section.rho, q=section.q, simulate=section.simulate)
        writer.write_frame("sweep_rho", result.frame)
        writer.write_json(
            "sweep_summary.json",
            {"monotone": result.monotone, "failures": {str(k): v for k, v in result.failures.items()}},
        )
        console.print(result.frame)
        return

    demand = build_demand(plan)
    box = build_box(plan)
    path = build_conjecture_path(plan)
    sweep = sweep_conjecture(demand, solver_rates(plan), box, path, config=build_solver_config(plan))
    complements = [strategic_complements(demand, pt.conjecture, box) for pt in sweep.points]
    frame = sweep.to_frame().with_columns(pl.Series("strategic_complements", complements))
    writer.write_frame("sweep", frame)
    writer.write_json(
        "sweep_summary.json",
        {"monotone": sweep.monotone, "failures": sum(not pt.ok for pt in sweep.points)},
    )
    console.print(frame)


def _simulate(plan: PlanFile, writer: ArtifactWriter) -> None:
    from cvlearn.harness import TargetResolutionError, resolve_target
    from cvlearn.plan import build_experiment_plan
    from cvlearn.sldl import run_sldl

    experiment = build_experiment_plan(plan)
    try:
        target, _ = resolve_target(experiment)
    except TargetResolutionError as e:
        logging.getLogger(__name__).warning("Simulating without a target: %s", e)
        target = None
    trace = run_sldl(experiment.sldl, experiment.demand, experiment.noise, experiment.design)
    writer.write_frame("trace", trace.to_frame(target))
    if experiment.sldl.log_periods:
        writer.write_frame("periods", trace.period_frame())
    summary = trace.summary(target)
    writer.write_json("summary.json", summary)

    table = Table(title="Simulation")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Batches", str(summary["batches"]))
    table.add_row("Periods", str(summary["periods"]))
    table.add_row("Final price", str([round(x, 6) for x in summary["final_price"]]))
    if target is not None:
        table.add_row("Target", str([round(float(x), 6) for x in target]))
        table.add_row("Final error", f"{summary['final_error']:.6g}")
    console.print(table)


def _rate(plan: PlanFile, writer: ArtifactWriter) -> None:
    from cvlearn.harness import fit_rate, run_replications
    from cvlearn.plan import build_experiment_plan

    experiment = build_experiment_plan(plan)
    stats = run_replications(experiment)
    writer.write_frame("rate_stats", stats.to_frame())
    fit = fit_rate(
        stats,
        plan.harness.tail_fraction,
        resamples=plan.harness.bootstrap_resamples,
        seed=experiment.seed,
    )
    writer.write_json("ratefit.json", fit)
    low, high = fit.slope_ci
    console.print(f"log-log slope [green]{fit.slope:.4f}[/green] (CI {low:.4f} .. {high:.4f})")


def _gmv(plan: PlanFile, writer: ArtifactWriter) -> None:
    from cvlearn.demand import gmv, revenues
    from cvlearn.equilibrium import gmv_optimize
    from cvlearn.plan import build_demand

    demand = build_demand(plan)
    price = gmv_optimize(
        demand,
        grid_resolution=plan.equilibrium.gmv_grid_resolution,
        refine_iters=plan.equilibrium.gmv_refine_iters,
    )
    payload = {
        "price": price.tolist(),
        "gmv": float(gmv(demand, price)),
        "revenues": revenues(demand, price).tolist(),
    }
    writer.write_json("gmv.json", payload)
    console.print_json(json.dumps(payload))


HANDLERS = {
    "check": _check,
    "solve": _solve,
    "sweep": _sweep,
    "simulate": _simulate,
    "rate": _rate,
    "gmv": _gmv,
}


def execute(subcommand: str, plan_path: str | Path, overrides: dict[str, Any] | None = None) -> int:
    """Load a plan, run one subcommand and write its artifacts and manifest.

    Parameters
    ----------
    subcommand : str
        One of ``check``, ``solve``, ``sweep``, ``simulate``, ``rate``, ``gmv``.
    plan_path : str | Path
        YAML plan file.
    overrides : dict | None
        Keyword overrides accepted by ``apply_overrides`` (``seed``, ``reps``,
        ``out_dir``, ``format``).

    Returns
    -------
    int
        0 on success, 2 on validation errors, 3 when a solver fails and 4 on
        any other failure.
    """
    from cvlearn.artifacts import ArtifactWriter
    from cvlearn.demand import DemandValidationError, PriceDomainError
    from cvlearn.design import DesignValidationError, UndefinedConditionalError
    from cvlearn.equilibrium import (
        AssumptionViolationError,
        ContractionError,
        NonConvergenceError,
        SingularSystemError,
    )
    from cvlearn.harness import InsufficientPointsError, TargetResolutionError
    from cvlearn.plan import PlanValidationError, apply_overrides, load_plan, plan_hash
    from cvlearn.sldl import SldlConfigError

    handler = HANDLERS.get(subcommand)
    if handler is None:
        console.print(f"[red]Unknown subcommand: {escape(subcommand)}[/red]")
        return EXIT_VALIDATION

    try:
        plan = apply_overrides(load_plan(plan_path), **(overrides or {}))
        writer = ArtifactWriter(plan.outputs.out_dir, plan.outputs.format)
        handler(plan, writer)
        writer.write_manifest(subcommand=subcommand, plan_hash=plan_hash(plan), seed=_seed(plan))
    except (
        PlanValidationError,
        DemandValidationError,
        DesignValidationError,
        SldlConfigError,
        UndefinedConditionalError,
        InsufficientPointsError,
        FileNotFoundError,
    ) as e:
        console.print(f"[red]Invalid plan: {escape(str(e))}[/red]")
        return EXIT_VALIDATION
    except (
        NonConvergenceError,
        ContractionError,
        TargetResolutionError,
        AssumptionViolationError,
        SingularSystemError,
        PriceDomainError,
    ) as e:
        console.print(f"[red]Solver failed during {subcommand}: {escape(str(e))}[/red]")
        return EXIT_SOLVER
    except Exception as e:
        console.print(f"[red]Error during {subcommand}: {escape(str(e))}[/red]")
        return EXIT_RUNTIME
    return EXIT_OK


def _run(
    subcommand: str,
    plan: Path,
    *,
    seed: int | None = None,
    reps: int | None = None,
    out_dir: Path | None = None,
    format: OutputFormat | None = None,
    quiet: bool = False,
) -> None:
    configure_logging(quiet)
    overrides = {"seed": seed, "reps": reps, "out_dir": out_dir, "format": format}
    code = execute(subcommand, plan, {k: v for k, v in overrides.items() if v is not None})
    if code != EXIT_OK:
        raise typer.Exit(code)


@app.command()
def check(
    plan: PlanArg,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Validate a plan, scan demand regularity and print contraction verdicts."""
    _run("check", plan, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def solve(
    plan: PlanArg,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Solve the CV (or Nash) equilibrium of a plan."""
    _run("solve", plan, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def sweep(
    plan: PlanArg,
    seed: SeedOpt = None,
    reps: RepsOpt = None,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Sweep a conjecture path or the experimentation correlation."""
    _run("sweep", plan, seed=seed, reps=reps, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def simulate(
    plan: PlanArg,
    seed: SeedOpt = None,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Run one learning trace."""
    _run("simulate", plan, seed=seed, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def rate(
    plan: PlanArg,
    seed: SeedOpt = None,
    reps: RepsOpt = None,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Run replications and fit the convergence rate."""
    _run("rate", plan, seed=seed, reps=reps, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def gmv(
    plan: PlanArg,
    out_dir: OutDirOpt = None,
    format: FormatOpt = None,
    quiet: QuietOpt = False,
) -> None:
    """Maximise joint revenue over the price box."""
    _run("gmv", plan, out_dir=out_dir, format=format, quiet=quiet)


@app.command()
def version() -> None:
    """Show version information."""
    from cvlearn import __version__

    console.print(f"cvlearn version [green]{__version__}[/green]")


if __name__ == "__main__":
    app()
