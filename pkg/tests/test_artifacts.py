"""Tests for the artifacts module."""

import json
from pathlib import Path

import polars as pl

from cvlearn.artifacts import MANIFEST_NAME, ArtifactWriter, package_versions
from cvlearn.models import OutputFormat


class TestArtifactWriter:
    """Tests for ArtifactWriter."""

    def test_csv_frame(self, tmp_path: Path) -> None:
        writer = ArtifactWriter(tmp_path / "out")
        path = writer.write_frame("trace", pl.DataFrame({"batch": [1, 2], "p_hat": [5.0, 5.5]}))
        assert path.name == "trace.csv"
        assert path.read_text().splitlines() == ["batch,p_hat", "1,5.0", "2,5.5"]

    def test_json_frame(self, tmp_path: Path) -> None:
        writer = ArtifactWriter(tmp_path, OutputFormat.JSON)
        path = writer.write_frame("trace", pl.DataFrame({"batch": [1]}))
        assert json.loads(path.read_text()) == [{"batch": 1}]

    def test_manifest_lists_sorted_artifacts(self, tmp_path: Path) -> None:
        writer = ArtifactWriter(tmp_path)
        writer.write_json("summary.json", {"a": 1})
        writer.write_json("check.json", {"b": 2})
        writer.write_json("summary.json", {"a": 3})
        writer.write_manifest(subcommand="check", plan_hash="abc", seed=5)
        manifest = json.loads((tmp_path / MANIFEST_NAME).read_text())
        assert [e["name"] for e in manifest["artifacts"]] == ["check.json", "summary.json"]
        assert manifest["seed"] == 5
        assert manifest["plan_hash"] == "abc"

    def test_package_versions(self) -> None:
        versions = package_versions()
        assert set(versions) == {"cvlearn", "numpy", "scipy", "polars"}
        assert all(versions.values())
