"""
CSV writers with fixed numeric formatting.

Every float is written with 17 significant digits so values round-trip
exactly and output hashes are stable across runs.
"""

import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from qfilter.errors import ShapeMismatch

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def format_value(value) -> str:
    return format(float(value), FLOAT_FORMAT)


def write_table(path: Union[str, Path], header: Sequence[str], table: np.ndarray) -> Path:
    """Write a header row and a 2-D numeric table."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ShapeMismatch(f"table shape {table.shape} does not match {len(header)} header columns")
    return write_rows(path, header, table.tolist())


def write_rows(path: Union[str, Path], header: Sequence[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def read_table(path: Union[str, Path]) -> tuple:
    """(header, table) from a file written by write_table."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header: List[str] = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))
