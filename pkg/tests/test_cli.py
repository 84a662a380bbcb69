"""Tests for the command-line interface."""

import hashlib
import json
from pathlib import Path
from unittest.mock import patch

import pytest
import yaml
from typer.testing import CliRunner

from cvlearn.cli import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, app, execute
from cvlearn.equilibrium import SingularSystemError, contraction_report
from cvlearn.plan import apply_overrides, load_plan, plan_hash

runner = CliRunner()

MARKET = {
    "schema_version": 1,
    "box": {"lower": [1.0, 1.0], "upper": [9.0, 9.0]},
    "demand": {"kind": "linear", "a": [100.0, 100.0], "b": [[10.0, 4.0], [4.0, 10.0]]},
}

SMALL_SLDL = {
    "u": 0.5,
    "batches": {"kind": "geometric", "initial": 32, "growth": 1.5, "count": 10},
    "seed": 1,
}


def _write_plan(tmp_path: Path, name: str = "plan.yaml", **sections) -> Path:
    data = json.loads(json.dumps(MARKET))
    data.update(sections)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text())


class TestCheck:
    """Tests for the check command."""

    def test_symmetric_plan(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(app, ["check", str(plans_dir / "symmetric_linear.yaml"), "-o", str(tmp_path)])
        assert result.exit_code == 0
        assert "‖Dz‖∞ = 0.2 < 1" in result.output
        report = _read_json(tmp_path / "check.json")
        assert report["bounds"]["m0"] == pytest.approx(14.0)
        assert report["contraction"]["nash"]["satisfied"] is True
        assert (tmp_path / "manifest.json").exists()

    def test_table_masses_rejected(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, design={"kind": "explicit_table", "table": {"00": 0.2, "01": 0.3, "10": 0.4}})
        result = runner.invoke(app, ["check", str(plan), "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_VALIDATION
        assert "design.table" in result.output
        assert not (tmp_path / "out" / "manifest.json").exists()

    def test_unknown_key(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, outputs={"out_dir": str(tmp_path), "colour": "red"})
        result = runner.invoke(app, ["check", str(plan)])
        assert result.exit_code == EXIT_VALIDATION
        assert "outputs.colour" in result.output


class TestSolve:
    """Tests for the solve and gmv commands."""

    def test_nash_price(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(app, ["solve", str(plans_dir / "symmetric_linear.yaml"), "-o", str(tmp_path)])
        assert result.exit_code == 0
        payload = _read_json(tmp_path / "solve.json")
        assert payload["price"] == pytest.approx([6.25, 6.25], abs=1e-8)
        assert payload["closed_form"]["price"] == pytest.approx([6.25, 6.25])
        assert payload["result"]["certified_interior"] is True
        assert "6.25" in result.output

    def test_conjecture_from_plan(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, equilibrium={"conjecture": 1.0})
        assert execute("solve", plan, {"out_dir": tmp_path / "out"}) == EXIT_OK
        payload = _read_json(tmp_path / "out" / "solve.json")
        assert payload["price"] == pytest.approx([25 / 3, 25 / 3], abs=1e-8)

    def test_solver_failure_exit_code(self, tmp_path: Path) -> None:
        data = {"demand": {"kind": "linear", "a": [100.0, 100.0], "b": [[10.0, 9.0], [9.0, 10.0]]}}
        plan = _write_plan(tmp_path, equilibrium={"conjecture": 1.0}, **data)
        assert execute("solve", plan, {"out_dir": tmp_path / "out"}) == EXIT_SOLVER

    def test_box_scanned_once(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, equilibrium={"conjecture": 1.0})
        with patch("cvlearn.equilibrium.contraction_report", wraps=contraction_report) as scan:
            assert execute("solve", plan, {"out_dir": tmp_path / "out"}) == EXIT_OK
        assert scan.call_count == 1

    def test_singular_closed_form_is_skipped(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path)
        with patch("cvlearn.equilibrium.linear_cv_closed_form", side_effect=SingularSystemError("singular")):
            assert execute("solve", plan, {"out_dir": tmp_path / "out"}) == EXIT_OK
        payload = _read_json(tmp_path / "out" / "solve.json")
        assert payload["closed_form"] is None
        assert payload["price"] == pytest.approx([6.25, 6.25], abs=1e-8)

    def test_gmv(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(app, ["gmv", str(plans_dir / "asymmetric_linear.yaml"), "-o", str(tmp_path)])
        assert result.exit_code == 0
        payload = _read_json(tmp_path / "gmv.json")
        assert payload["price"] == pytest.approx([9780 / 4751, 31120 / 4751], abs=1e-4)
        assert payload["gmv"] == pytest.approx(sum(payload["revenues"]))


class TestSweep:
    """Tests for the sweep command."""

    def test_conjecture_path(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(app, ["sweep", str(plans_dir / "symmetric_linear.yaml"), "-o", str(tmp_path)])
        assert result.exit_code == 0
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 6
        assert lines[0].startswith("path_index,A_12,A_21,p_1,p_2")
        assert _read_json(tmp_path / "sweep_summary.json") == {"monotone": True, "failures": 0}

    def test_json_format(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(
            app, ["sweep", str(plans_dir / "asymmetric_linear.yaml"), "-o", str(tmp_path), "--format", "json"]
        )
        assert result.exit_code == 0
        rows = json.loads((tmp_path / "sweep.json").read_text())
        assert rows[0]["p_1"] == pytest.approx(828 / 479, abs=1e-6)
        assert rows[-1]["p_2"] == pytest.approx(7550 / 1051, abs=1e-6)

    def test_design_sweep_without_simulation(self, tmp_path: Path) -> None:
        plan = _write_plan(
            tmp_path,
            design_sweep={"rho": [0.0, 0.5], "simulate": False},
            sldl=SMALL_SLDL,
            harness={"target": "cv_from_design"},
        )
        assert execute("sweep", plan, {"out_dir": tmp_path / "out"}) == EXIT_OK
        lines = (tmp_path / "out" / "sweep_rho.csv").read_text().strip().splitlines()
        assert len(lines) == 3


class TestSimulation:
    """Tests for the simulate and rate commands."""

    def test_simulate(self, tmp_path: Path) -> None:
        sldl = dict(SMALL_SLDL, log_periods=True)
        plan = _write_plan(tmp_path, design={"kind": "independent", "q": 0.5}, sldl=sldl)
        result = runner.invoke(app, ["simulate", str(plan), "-o", str(tmp_path / "out"), "--seed", "4"])
        assert result.exit_code == 0
        summary = _read_json(tmp_path / "out" / "summary.json")
        assert summary["batches"] == 10
        assert summary["target"] == pytest.approx([6.25, 6.25])
        assert summary["config"]["seed"] == 4
        assert (tmp_path / "out" / "periods.csv").exists()
        manifest = _read_json(tmp_path / "out" / "manifest.json")
        assert manifest["seed"] == 4

    def test_simulate_needs_design(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, sldl=SMALL_SLDL)
        assert execute("simulate", plan, {"out_dir": tmp_path / "out"}) == EXIT_VALIDATION

    def test_rate(self, tmp_path: Path) -> None:
        plan = _write_plan(
            tmp_path,
            noise={"kind": "bounded_uniform", "sigma": 1.0},
            design={"kind": "independent", "q": 0.5},
            sldl=SMALL_SLDL,
            harness={"replications": 2, "bootstrap_resamples": 20},
        )
        result = runner.invoke(app, ["rate", str(plan), "-o", str(tmp_path / "out"), "--reps", "3"])
        assert result.exit_code == 0
        fit = _read_json(tmp_path / "out" / "ratefit.json")
        assert fit["window"] == [6, 10]
        assert fit["resamples"] == 20
        assert "log-log slope" in result.output

    def test_rate_with_too_few_batches(self, tmp_path: Path) -> None:
        sldl = dict(SMALL_SLDL, batches={"kind": "geometric", "initial": 32, "growth": 1.5, "count": 4})
        plan = _write_plan(tmp_path, design={"kind": "independent", "q": 0.5}, sldl=sldl)
        assert execute("rate", plan, {"out_dir": tmp_path / "out"}) == EXIT_VALIDATION


class TestArtifacts:
    """Tests for manifests and reproducible outputs."""

    def test_manifest(self, plans_dir: Path, tmp_path: Path) -> None:
        path = plans_dir / "symmetric_linear.yaml"
        assert execute("solve", path, {"out_dir": tmp_path}) == EXIT_OK
        manifest = _read_json(tmp_path / "manifest.json")
        assert manifest["subcommand"] == "solve"
        assert manifest["seed"] is None
        assert manifest["plan_hash"] == plan_hash(apply_overrides(load_plan(path), out_dir=tmp_path))
        assert set(manifest["versions"]) == {"cvlearn", "numpy", "scipy", "polars"}
        [entry] = manifest["artifacts"]
        assert entry["name"] == "solve.json"
        assert entry["sha256"] == hashlib.sha256((tmp_path / "solve.json").read_bytes()).hexdigest()

    def test_outputs_are_reproducible(self, tmp_path: Path) -> None:
        plan = _write_plan(tmp_path, design={"kind": "independent", "q": 0.5}, sldl=SMALL_SLDL)
        out = tmp_path / "out"
        assert execute("simulate", plan, {"out_dir": out}) == EXIT_OK
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert execute("simulate", plan, {"out_dir": out}) == EXIT_OK
        assert first == {p.name: p.read_bytes() for p in out.iterdir()}

    def test_quiet_leaves_outputs_unchanged(self, plans_dir: Path, tmp_path: Path) -> None:
        plan = str(plans_dir / "symmetric_linear.yaml")
        runner.invoke(app, ["gmv", plan, "-o", str(tmp_path / "loud")])
        runner.invoke(app, ["gmv", plan, "-o", str(tmp_path / "quiet"), "--quiet"])
        assert (tmp_path / "loud" / "gmv.json").read_bytes() == (tmp_path / "quiet" / "gmv.json").read_bytes()


class TestErrors:
    """Tests for exit codes on bad input."""

    def test_missing_plan(self, tmp_path: Path) -> None:
        assert execute("check", tmp_path / "absent.yaml") == EXIT_VALIDATION

    def test_seed_without_sldl_section(self, plans_dir: Path, tmp_path: Path) -> None:
        result = runner.invoke(
            app, ["simulate", str(plans_dir / "symmetric_linear.yaml"), "--seed", "3", "-o", str(tmp_path)]
        )
        assert result.exit_code == EXIT_VALIDATION
        assert "sldl.seed" in result.output

    def test_unknown_subcommand(self, plans_dir: Path) -> None:
        assert execute("optimise", plans_dir / "symmetric_linear.yaml") == EXIT_VALIDATION


class TestVersion:
    """Tests for the version command."""

    def test_version(self) -> None:
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert "cvlearn version" in result.output
