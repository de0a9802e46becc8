"""Result-table persistence (CSV and JSON).

Output is byte-deterministic: columns keep the table's order, floats are
rendered with a fixed number of significant digits and line endings are
always ``\\n``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any

from app.config import OutputFormat
from app.exceptions import RosterParseError, TableWriteError
from app.models.experiment import Table

logger = logging.getLogger(__name__)


def format_value(value: Any, sig_digits: int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{sig_digits}g}"
    return str(value)


def _json_value(value: Any, sig_digits: int) -> Any:
    if isinstance(value, bool) or not isinstance(value, float):
        return value
    if math.isnan(value) or math.isinf(value):
        return None
    return float(f"{value:.{sig_digits}g}")


def render_table(table: Table, fmt: OutputFormat, sig_digits: int = 6) -> str:
    """Serialize ``table`` to text without touching the filesystem."""
    if fmt is OutputFormat.JSON:
        rows = [
            {column: _json_value(row[column], sig_digits) for column in table.columns}
            for row in table.rows
        ]
        return json.dumps(rows, indent=2) + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_value(row[column], sig_digits) for column in table.columns])
    return buffer.getvalue()


def write_table(
    table: Table,
    path: Path | str,
    fmt: OutputFormat = OutputFormat.CSV,
    sig_digits: int = 6,
) -> Path:
    """Write ``table`` to ``path``, creating parent directories.

    Raises:
        TableWriteError: If the file cannot be written.
    """
    target = Path(path)
    text = render_table(table, fmt, sig_digits)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise TableWriteError(target, exc) from exc
    logger.info("Wrote %d rows to %s", len(table.rows), target)
    return target


def parse_value(text: str) -> Any:
    """Inverse of ``format_value`` for CSV cells."""
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: Path | str, fmt: OutputFormat = OutputFormat.CSV) -> Table:
    """Load a table written by ``write_table``."""
    source = Path(path)
    text = source.read_text(encoding="utf-8")

    if fmt is OutputFormat.JSON:
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RosterParseError(source, exc.lineno, exc.msg) from exc
        if not isinstance(rows, list) or not all(isinstance(row, dict) for row in rows):
            raise RosterParseError(source, 1, "expected a JSON list of row objects")
        columns = tuple(rows[0]) if rows else ()
        return Table(
            columns=columns,
            rows=[
                {c: float("nan") if row[c] is None else row[c] for c in columns} for row in rows
            ],
        )

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return Table(columns=())
    columns = tuple(header)
    table = Table(columns=columns)
    for line, cells in enumerate(reader, start=2):
        if len(cells) != len(columns):
            raise RosterParseError(source, line, f"expected {len(columns)} cells, got {len(cells)}")
        table.rows.append({c: parse_value(v) for c, v in zip(columns, cells)})
    return table
