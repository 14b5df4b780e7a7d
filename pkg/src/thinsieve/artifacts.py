"""Writers for every file thinsieve emits.

CSV files carry a schema comment as their first line; JSON is written with
sorted keys so identical inputs give byte-identical files. Formats are
documented in docs/schemas.md.
"""

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, TextIO

from .errors import ComputationError
from .lattice import Triple

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ExportIOError(ComputationError):
    """Raised when an artifact cannot be written."""

    pass


def schema_header(kind: str, columns: Sequence[str]) -> str:
    return f"# thinsieve {kind} schema {SCHEMA_VERSION} ({','.join(columns)})"


def write_csv(
    rows: Iterable[Sequence[Any]],
    columns: Sequence[str],
    out: TextIO | Path,
    *,
    kind: str,
) -> None:
    """Write a schema comment, a header row and ``rows``.

    Raises:
        ExportIOError: If the destination cannot be written
    """
    if isinstance(out, Path):
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            with open(out, "w", newline="") as f:
                write_csv(rows, columns, f, kind=kind)
        except OSError as e:
            raise ExportIOError(f"Cannot write {out}: {e}") from e
        logger.debug(f"Wrote {kind} CSV to {out}")
        return
    out.write(schema_header(kind, columns) + "\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)


def read_csv(path: Path) -> list[dict[str, str]]:
    """Read a CSV written by ``write_csv``, skipping its schema comment."""
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_points_csv(points: Iterable[Triple], out: TextIO | Path) -> None:
    write_csv((p.as_tuple() for p in points), ("x", "y", "z"), out, kind="points")


def dump_json(data: Any, out: TextIO | Path) -> None:
    """Write JSON with sorted keys, two-space indent and a trailing newline.

    Raises:
        ExportIOError: If the destination cannot be written
    """
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if isinstance(out, Path):
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text)
        except OSError as e:
            raise ExportIOError(f"Cannot write {out}: {e}") from e
        return
    out.write(text)
