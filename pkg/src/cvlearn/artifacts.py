"""Writers for run outputs and the run manifest."""

from __future__ import annotations

import hashlib
import json
import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import polars as pl
from pydantic import BaseModel, ConfigDict, Field

from cvlearn.models import OutputFormat

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
VERSIONED_PACKAGES = ("cvlearn", "numpy", "scipy", "polars")


def package_versions() -> dict[str, str]:
    """Installed versions of the packages that shape numerical output."""
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ArtifactEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    sha256: str


class Manifest(BaseModel):
    """Provenance of one command-line run. Holds no wall-clock fields."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    plan_hash: str
    seed: int | None
    versions: dict[str, str] = Field(default_factory=package_versions)
    artifacts: list[ArtifactEntry] = Field(default_factory=list)


class ArtifactWriter:
    """Writes frames and JSON documents into one output directory.

    Parameters
    ----------
    out_dir : str | Path
        Created on first write.
    fmt : OutputFormat
        Format of tabular outputs.
    """

    def __init__(self, out_dir: str | Path, fmt: OutputFormat | str = OutputFormat.CSV):
        self.out_dir = Path(out_dir)
        self.fmt = OutputFormat(fmt)
        self.written: list[ArtifactEntry] = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def _record(self, path: Path) -> Path:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.written = [e for e in self.written if e.name != path.name]
        self.written.append(ArtifactEntry(name=path.name, sha256=digest))
        logger.info("Wrote %s", path)
        return path

    def write_frame(self, stem: str, frame: pl.DataFrame) -> Path:
        """Write a table as ``<stem>.csv`` or ``<stem>.json``."""
        path = self._path(f"{stem}.{self.fmt.value}")
        if self.fmt is OutputFormat.CSV:
            frame.write_csv(path)
        else:
            path.write_text(json.dumps(frame.to_dicts(), indent=2) + "\n")
        return self._record(path)

    def write_json(self, name: str, payload: BaseModel | dict[str, Any] | list[Any]) -> Path:
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        path = self._path(name)
        path.write_text(json.dumps(data, indent=2) + "\n")
        return self._record(path)

    def write_manifest(self, *, subcommand: str, plan_hash: str, seed: int | None) -> Path:
        manifest = Manifest(
            subcommand=subcommand,
            plan_hash=plan_hash,
            seed=seed,
            artifacts=sorted(self.written, key=lambda e: e.name),
        )
        path = self._path(MANIFEST_NAME)
        path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2) + "\n")
        logger.info("Wrote %s", path)
        return path
