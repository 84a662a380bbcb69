#!/usr/bin/env python3
"""Debug script to inspect how the price error of a plan decays batch by batch.

Loads a plan, runs its replications and prints, per batch, the elapsed
periods, the mean error against the target equilibrium and how often sellers
held their price or had a fitted slope with the wrong sign.

Usage:
    uv run python scripts/debug_rate.py plans/convergence_rate.yaml --reps 10
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated

import numpy as np
import typer

from cvlearn.harness import ExperimentPlan, InsufficientPointsError, fit_rate, resolve_target, run_replications
from cvlearn.plan import apply_overrides, build_experiment_plan, load_plan
from cvlearn.sldl import replication_rng, run_sldl

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


def flag_rates(experiment: ExperimentPlan) -> tuple[np.ndarray, np.ndarray]:
    """Share of seller-batches that held their price or fitted a negative slope, from replication 0."""
    trace = run_sldl(
        experiment.sldl, experiment.demand, experiment.noise, experiment.design, rng=replication_rng(experiment.seed, 0)
    )
    skipped = np.array([r.skipped.mean() for r in trace.records])
    negative = np.array([r.negative_slope.mean() for r in trace.records])
    return skipped, negative


def main(
    plan_path: Annotated[Path, typer.Argument(help="Experiment plan file (YAML)")],
    reps: Annotated[int | None, typer.Option("--reps", help="Override the number of replications")] = None,
) -> None:
    plan = apply_overrides(load_plan(plan_path), reps=reps)
    experiment = build_experiment_plan(plan)
    target, _ = resolve_target(experiment)
    print(f"Target equilibrium: {target.tolist()}")

    stats = run_replications(experiment, target=target)
    skipped, negative = flag_rates(experiment)

    print(f"\n{'batch':>5} {'T':>10} {'mean_err':>12} {'mse':>12} {'skipped':>8} {'neg':>6}")
    for k in range(stats.batches):
        print(
            f"{k + 1:>5} {int(stats.T[k]):>10} {stats.mean_err[k]:>12.5g} "
            f"{stats.mean_sq_err[k]:>12.5g} {skipped[k]:>8.2f} {negative[k]:>6.2f}"
        )

    try:
        fit = fit_rate(stats, plan.harness.tail_fraction, resamples=200, seed=experiment.seed)
    except InsufficientPointsError as e:
        logger.warning("No rate fit: %s", e)
        raise typer.Exit(1) from None
    low, high = fit.slope_ci
    print(f"\nlog-log slope {fit.slope:.4f} (CI {low:.4f} .. {high:.4f}) over batches {fit.window}")


if __name__ == "__main__":
    typer.run(main)
