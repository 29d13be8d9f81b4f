"""
Sequential orchestration of one subcommand.

Creates the output directory and the RunRecord, dispatches to the handler,
and turns the handler's tolerance checks into an exit status. Errors are
recorded and re-raised for the entry point to report.
"""

import logging
from pathlib import Path
from typing import Union

from qfilter.errors import IOFailure, InvalidParameter, QFilterError, ToleranceFailed

from app.commands.v1 import COMMANDS
from app.core.config_file import Config
from app.core.context import CommandContext
from app.core.run_record import RunRecord

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_ERROR = 2


def run_subcommand(name: str, config: Config, out_dir: Union[str, Path], workers: int = 1) -> int:
    """
    Run one subcommand and write its outputs plus run_record.txt.

    Returns:
        EXIT_OK if every tolerance check passed, EXIT_TOLERANCE otherwise

    Raises:
        QFilterError: any module error (already recorded in run_record.txt)
    """
    if name not in COMMANDS:
        raise InvalidParameter("subcommand", f"expected one of {', '.join(sorted(COMMANDS))}, got {name!r}")
    if workers < 1:
        raise InvalidParameter("workers", f"must be >= 1, got {workers}")

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOFailure(f"cannot create output directory {out_dir}: {e}")

    record = RunRecord(subcommand=name, config_snapshot=config.snapshot())
    record.start()
    logger.info(f"Starting {name} (seed={config.run.seed}, out={out_dir})")

    ctx = CommandContext(config=config, out_dir=out_dir, record=record, workers=workers)
    try:
        COMMANDS[name](ctx)
    except QFilterError as e:
        logger.error(f"{name} failed: {e.to_line()}")
        record.fail(e.to_line())
        record.write(out_dir)
        raise
    except OSError as e:
        error = IOFailure(str(e))
        record.fail(error.to_line())
        record.write(out_dir)
        raise error

    record.complete()
    failure = None
    if not record.all_passed:
        failure = ToleranceFailed(f"{name}: {', '.join(record.failed_checks())}")
        record.error = failure.to_line()
    record.write(out_dir)
    logger.info(f"Finished {name} in {record.get_wall_time_seconds():.2f}s, {len(record.files)} files")

    if failure is not None:
        logger.warning(failure.to_line())
        return EXIT_TOLERANCE
    return EXIT_OK
