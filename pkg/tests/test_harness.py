"""Tests for the harness module."""

from unittest.mock import patch

import numpy as np
import pytest

from cvlearn.demand import LinearDemand, NoiseSpec, PriceBox
from cvlearn.design import DesignSchedule, ExperimentDesign, build_design
from cvlearn.harness import (
    ExperimentPlan,
    InsufficientPointsError,
    ReplicationStats,
    TargetResolutionError,
    correlation_sweep,
    fit_rate,
    resolve_target,
    run_replications,
)
from cvlearn.models import DesignKind, NoiseKind, TargetKind
from cvlearn.sldl import BatchSchedule, SldlConfig, replication_rng, run_sldl


def _plan(
    demand: LinearDemand,
    design: ExperimentDesign,
    *,
    batches: BatchSchedule | None = None,
    noise: NoiseSpec | None = None,
    **kwargs,
) -> ExperimentPlan:
    sldl = SldlConfig(
        u=0.5,
        batch_schedule=batches or BatchSchedule.geometric(initial=64, growth=1.4, count=6),
        seed=kwargs.pop("seed", 11),
    )
    return ExperimentPlan(demand=demand, noise=noise, design=DesignSchedule.constant(design), sldl=sldl, **kwargs)


def _mixture(rho: float) -> ExperimentDesign:
    return build_design(DesignKind.COMMON_SHOCK_MIXTURE, n=2, rho=rho, q=0.5)


class TestResolveTarget:
    """Tests for resolve_target."""

    def test_nash(self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign) -> None:
        price, result = resolve_target(_plan(symmetric_linear, independent_design))
        np.testing.assert_allclose(price, [6.25, 6.25], atol=1e-8)
        assert result is not None and result.converged

    def test_cv_from_mixture_design(self, symmetric_linear: LinearDemand) -> None:
        plan = _plan(symmetric_linear, _mixture(0.8), target=TargetKind.CV_FROM_DESIGN)
        price, _ = resolve_target(plan)
        np.testing.assert_allclose(price, [25 / 3.2, 25 / 3.2], atol=1e-8)

    def test_explicit(self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign) -> None:
        plan = _plan(
            symmetric_linear, independent_design, target=TargetKind.EXPLICIT, target_price=np.array([6.0, 7.0])
        )
        price, result = resolve_target(plan)
        assert price.tolist() == [6.0, 7.0]
        assert result is None

    @pytest.mark.parametrize("target_price", [None, np.array([0.5, 5.0])])
    def test_bad_explicit_target(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign, target_price: np.ndarray | None
    ) -> None:
        plan = _plan(symmetric_linear, independent_design, target=TargetKind.EXPLICIT, target_price=target_price)
        with pytest.raises(TargetResolutionError):
            resolve_target(plan)

    def test_unsolvable(self) -> None:
        d = LinearDemand(a=[100.0, 100.0], b=[[10.0, 9.0], [9.0, 10.0]], box=PriceBox([1.0, 1.0], [9.0, 9.0]))
        plan = _plan(d, build_design(DesignKind.EXPLICIT_TABLE, table={"00": 0.5, "11": 0.5}))
        plan.target = TargetKind.CV_FROM_DESIGN
        with pytest.raises(TargetResolutionError):
            resolve_target(plan)

    def test_rejects_zero_replications(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        with pytest.raises(ValueError):
            _plan(symmetric_linear, independent_design, replications=0)


class TestReplications:
    """Tests for run_replications and ReplicationStats."""

    def test_single_replication_single_batch(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        plan = _plan(symmetric_linear, independent_design, batches=BatchSchedule.from_lengths([64]))
        stats = run_replications(plan)
        trace = run_sldl(plan.sldl, symmetric_linear, None, plan.design, rng=replication_rng(plan.seed, 0))
        assert stats.errors.shape == (1, 1)
        assert stats.errors[0, 0] == trace.errors(stats.target)[0]
        assert stats.mean_err[0] == stats.errors[0, 0]
        assert stats.var_err[0] == 0.0
        assert stats.T.tolist() == [64.0]

    def test_results_independent_of_workers(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        noise = NoiseSpec(kind=NoiseKind.BOUNDED_UNIFORM, sigma=[0.5, 0.5])
        serial = run_replications(_plan(symmetric_linear, independent_design, noise=noise, replications=4))
        parallel = run_replications(
            _plan(symmetric_linear, independent_design, noise=noise, replications=4, n_jobs=2)
        )
        np.testing.assert_array_equal(serial.errors, parallel.errors)
        np.testing.assert_array_equal(serial.final_prices, parallel.final_prices)

    def test_explicit_target_skips_solver(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        stats = run_replications(_plan(symmetric_linear, independent_design), target=np.array([5.0, 5.0]))
        assert stats.target.tolist() == [5.0, 5.0]

    def test_frame(self) -> None:
        stats = ReplicationStats.from_errors([64.0, 128.0], [[0.2, 0.1], [0.4, 0.3]])
        frame = stats.to_frame()
        assert frame.columns == ["batch", "T", "mean_err", "var_err", "mean_sq_err", "q10", "q50", "q90"]
        assert frame["mean_err"].to_list() == pytest.approx([0.3, 0.2])
        assert frame["mean_sq_err"].to_list() == pytest.approx([0.1, 0.05])


class TestFitRate:
    """Tests for fit_rate."""

    T = 64.0 * 2.0 ** np.arange(10)

    @pytest.mark.parametrize("exponent", [-0.5, -1.0])
    def test_exact_power_law(self, exponent: float) -> None:
        errors = np.sqrt(3.0 * self.T**exponent)
        fit = fit_rate(ReplicationStats.from_errors(self.T, errors), resamples=20)
        assert fit.slope == pytest.approx(exponent, abs=1e-10)
        assert fit.slope_ci[0] == pytest.approx(exponent, abs=1e-10)
        assert fit.slope_ci[1] == pytest.approx(exponent, abs=1e-10)
        assert fit.window == (6, 10)

    def test_truncated_last_batch_left_out(self) -> None:
        errors = np.sqrt(self.T**-0.5)
        errors[-1] = 10.0
        stats = ReplicationStats.from_errors(self.T, errors, truncated_last=True)
        fit = fit_rate(stats, resamples=10)
        assert fit.window == (5, 9)
        assert fit.slope == pytest.approx(-0.5, abs=1e-10)

    def test_insufficient_points(self) -> None:
        stats = ReplicationStats.from_errors(self.T[:6], np.sqrt(self.T[:6] ** -0.5))
        with pytest.raises(InsufficientPointsError):
            fit_rate(stats, tail_fraction=0.5)

    def test_tail_fraction_range(self) -> None:
        with pytest.raises(ValueError):
            fit_rate(ReplicationStats.from_errors(self.T, np.ones(10)), tail_fraction=0.0)

    def test_bootstrap_is_seeded(self) -> None:
        rng = np.random.default_rng(0)
        errors = np.sqrt(self.T**-0.5) * rng.uniform(0.5, 1.5, (20, 10))
        stats = ReplicationStats.from_errors(self.T, errors)
        first = fit_rate(stats, resamples=50, seed=4)
        second = fit_rate(stats, resamples=50, seed=4)
        assert first.slope_ci == second.slope_ci
        assert first.slope_ci[0] <= first.slope <= first.slope_ci[1]


class TestCorrelationSweep:
    """Tests for correlation_sweep."""

    def test_limits_follow_rho(self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign) -> None:
        sweep = correlation_sweep(_plan(symmetric_linear, independent_design), [0.0, 0.5, 0.8], simulate=False)
        assert sweep.frame["a_star"].to_list() == pytest.approx([0.0, 0.5, 0.8])
        assert sweep.frame["limit_1"].to_list() == pytest.approx([6.25, 25 / 3.5, 7.8125], abs=1e-8)
        assert sweep.monotone is True
        assert not sweep.failures
        assert "simulated_1" not in sweep.frame.columns

    def test_failures_recorded(self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign) -> None:
        sweep = correlation_sweep(_plan(symmetric_linear, independent_design), [0.2, 1.5], simulate=False)
        assert 1.5 in sweep.failures
        assert sweep.monotone is None
        assert sweep.frame["error"].to_list()[0] is None

    def test_unexpected_errors_propagate(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        with patch("cvlearn.harness.resolve_target", side_effect=KeyError("limit")):
            with pytest.raises(KeyError):
                correlation_sweep(_plan(symmetric_linear, independent_design), [0.2], simulate=False)

    def test_target_failure_recorded(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        error = TargetResolutionError("no contraction")
        with patch("cvlearn.harness.resolve_target", side_effect=error):
            sweep = correlation_sweep(_plan(symmetric_linear, independent_design), [0.2, 0.4], simulate=False)
        assert sweep.failures == {0.2: "no contraction", 0.4: "no contraction"}
        assert sweep.monotone is None


@pytest.mark.slow
class TestMonteCarlo:
    """Acceptance runs of the full learning loop."""

    def test_convergence_rate(self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign) -> None:
        plan = _plan(
            symmetric_linear,
            independent_design,
            batches=BatchSchedule.geometric(initial=64, growth=1.35, count=28),
            noise=NoiseSpec(kind=NoiseKind.BOUNDED_UNIFORM, sigma=[1.0, 1.0]),
            replications=50,
            n_jobs=-1,
            seed=7,
        )
        fit = fit_rate(run_replications(plan), tail_fraction=0.5)
        assert -0.70 <= fit.slope <= -0.30

    def test_mixture_learns_conjectural_equilibrium(
        self, symmetric_linear: LinearDemand, independent_design: ExperimentDesign
    ) -> None:
        plan = _plan(
            symmetric_linear,
            independent_design,
            batches=BatchSchedule.geometric(initial=64, growth=1.4, count=20),
            noise=NoiseSpec(kind=NoiseKind.BOUNDED_UNIFORM, sigma=[0.05, 0.05]),
            replications=50,
            n_jobs=-1,
        )
        sweep = correlation_sweep(plan, [0.3, 0.8])
        assert not sweep.failures
        for row in sweep.frame.iter_rows(named=True):
            limit = 25 / (4 - row["rho"])
            for i in (1, 2):
                assert row[f"limit_{i}"] == pytest.approx(limit, abs=1e-8)
                assert row[f"simulated_{i}"] == pytest.approx(limit, abs=0.05)
        assert sweep.monotone is True
