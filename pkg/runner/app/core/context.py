"""Shared state handed to every subcommand handler."""

import logging
from dataclasses import dataclass
from pathlib import Path

from qfilter.errors import InvalidParameter

from app.core.config_file import Config
from app.core.run_record import RunRecord

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    config: Config
    out_dir: Path
    record: RunRecord
    workers: int = 1

    def output(self, name: str) -> Path:
        return self.out_dir / name

    def n_steps(self) -> int:
        """Step count of the configured horizon; at least one step is required."""
        n_steps = self.config.n_steps
        if n_steps < 1:
            raise InvalidParameter(
                "run.t_end", f"must be >= run.dt, got t_end={self.config.run.t_end}, dt={self.config.run.dt}"
            )
        return n_steps

    def check(self, name: str, value: float, limit: float, passed: bool) -> bool:
        """Record a tolerance summary and log it."""
        text = f"{value:.6e} (limit {limit:g})"
        self.record.add_summary(name, text, passed=passed)
        if passed:
            logger.info(f"{name}: {text} ok")
        else:
            logger.warning(f"{name}: {text} FAILED")
        return passed

    def note(self, name: str, value) -> None:
        """Record an informational summary (not a tolerance check)."""
        text = format(value, ".6e") if isinstance(value, float) else str(value)
        self.record.add_summary(name, text)
        logger.info(f"{name}: {text}")
