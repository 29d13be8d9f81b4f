"""
RunRecord - provenance for one subcommand invocation.

Tracks:
1. The config snapshot and artifact version the outputs came from
2. Lifecycle status and wall time
3. A manifest of every output file with its sha256 content hash
4. The in-run tolerance summaries

Output files are byte-deterministic given (config, version), so re-running
a recorded config reproduces the manifest hashes exactly. The record itself
carries timestamps and is excluded from its own manifest.
"""

import hashlib
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

from qfilter import __version__

RECORD_FILE = "run_record.txt"
CONFIG_FILE = "config.txt"


class RunStatus(Enum):
    CREATED = "created"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ManifestEntry:
    """One output file and its content hash."""
    name: str                      # path relative to the output directory
    sha256: str
    size_bytes: int

    def to_dict(self) -> Dict:
        return {"name": self.name, "sha256": self.sha256, "size_bytes": self.size_bytes}


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunRecord:
    """
    Provenance of a single run.

    Usage:
        record = RunRecord(subcommand="riccati", config_snapshot=config.snapshot())
        record.start()
        path = write_table(out_dir / "riccati.csv", header, table)
        record.add_file(path, out_dir)
        record.add_summary("max_deviation", "3.1e-12", passed=True)
        record.complete()
        record.write(out_dir)
    """

    # Required fields
    subcommand: str
    config_snapshot: str

    # Auto-generated fields
    version: str = __version__
    run_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())

    # State tracking
    status: RunStatus = RunStatus.CREATED
    started_at: Optional[str] = None
    ended_at: Optional[str] = None
    error: Optional[str] = None

    # Outputs
    files: List[ManifestEntry] = field(default_factory=list)
    summaries: Dict[str, str] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)

    # =========================================================================
    # Lifecycle
    # =========================================================================

    def start(self) -> None:
        self.status = RunStatus.RUNNING
        self.started_at = datetime.now().isoformat()

    def complete(self) -> None:
        self.status = RunStatus.COMPLETED
        self.ended_at = datetime.now().isoformat()

    def fail(self, error: str) -> None:
        """Mark the run as failed with a one-line error."""
        self.status = RunStatus.FAILED
        self.error = error
        self.ended_at = datetime.now().isoformat()

    # =========================================================================
    # Outputs
    # =========================================================================

    def add_file(self, path: Union[str, Path], out_dir: Union[str, Path]) -> ManifestEntry:
        """Hash an output file and add it to the manifest."""
        path = Path(path)
        entry = ManifestEntry(
            name=path.relative_to(out_dir).as_posix(),
            sha256=file_sha256(path),
            size_bytes=path.stat().st_size,
        )
        self.files.append(entry)
        return entry

    def add_summary(self, name: str, value: str, passed: Optional[bool] = None) -> None:
        """
        Record a summary line; with `passed` it also counts as a tolerance check.
        """
        self.summaries[name] = value
        if passed is not None:
            self.checks[name] = bool(passed)

    @property
    def all_passed(self) -> bool:
        return all(self.checks.values())

    def failed_checks(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]

    # =========================================================================
    # Metrics
    # =========================================================================

    def get_wall_time_seconds(self) -> Optional[float]:
        """Wall time between start and end (or now, while running)."""
        if not self.started_at:
            return None

        end = self.ended_at or datetime.now().isoformat()

        start_dt = datetime.fromisoformat(self.started_at)
        end_dt = datetime.fromisoformat(end)

        return (end_dt - start_dt).total_seconds()

    # =========================================================================
    # Serialization
    # =========================================================================

    def to_dict(self) -> Dict:
        return {
            "run_id": self.run_id,
            "subcommand": self.subcommand,
            "version": self.version,
            "status": self.status.value,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "wall_time_seconds": self.get_wall_time_seconds(),
            "error": self.error,
            "config_snapshot": self.config_snapshot,
            "files": [entry.to_dict() for entry in self.files],
            "summaries": dict(self.summaries),
            "checks": dict(self.checks),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RunRecord":
        record = cls(subcommand=data["subcommand"], config_snapshot=data.get("config_snapshot", ""))

        record.run_id = data.get("run_id", record.run_id)
        record.version = data.get("version", record.version)
        record.status = RunStatus(data.get("status", "created"))
        record.created_at = data.get("created_at", record.created_at)
        record.started_at = data.get("started_at")
        record.ended_at = data.get("ended_at")
        record.error = data.get("error")
        record.summaries = dict(data.get("summaries", {}))
        record.checks = {k: bool(v) for k, v in data.get("checks", {}).items()}

        for entry_data in data.get("files", []):
            record.files.append(
                ManifestEntry(
                    name=entry_data["name"],
                    sha256=entry_data["sha256"],
                    size_bytes=int(entry_data["size_bytes"]),
                )
            )

        return record

    def to_text(self) -> str:
        """Plain-text manifest: header fields, summaries, then one line per file."""
        wall = self.get_wall_time_seconds()
        lines = [
            f"run_id: {self.run_id}",
            f"subcommand: {self.subcommand}",
            f"version: {self.version}",
            f"status: {self.status.value}",
            f"created_at: {self.created_at}",
            f"started_at: {self.started_at or ''}",
            f"ended_at: {self.ended_at or ''}",
            f"wall_time_seconds: {'' if wall is None else format(wall, '.3f')}",
        ]
        if self.error:
            lines.append(f"error: {self.error}")
        lines.append("summaries:")
        for name, value in self.summaries.items():
            status = ""
            if name in self.checks:
                status = "  pass" if self.checks[name] else "  FAIL"
            lines.append(f"  {name} = {value}{status}")
        lines.append("files:")
        for entry in self.files:
            lines.append(f"  {entry.sha256}  {entry.size_bytes}  {entry.name}")
        lines.append("config:")
        lines.extend(f"  {line}" for line in self.config_snapshot.splitlines())
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Union[str, Path]) -> Path:
        """Write run_record.txt and the config snapshot into out_dir."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / CONFIG_FILE).write_text(self.config_snapshot)
        path = out_dir / RECORD_FILE
        path.write_text(self.to_text())
        return path
