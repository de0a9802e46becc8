"""Roster and program file ingestion.

Roster CSV: ``student_id,rank,program_id[,priority_class]``, one row per
listed program, ranks 1..L per student. Programs CSV: ``program_id,capacity``.
Students keep the order of their first appearance in the file.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from pathlib import Path

from pydantic import ValidationError

from app.exceptions import ReferentialIntegrityError, RosterParseError, TableWriteError
from app.models.school import Program, Programs, Roster, Student

logger = logging.getLogger(__name__)

ROSTER_COLUMNS = ("student_id", "rank", "program_id")
PROGRAM_COLUMNS = ("program_id", "capacity")


def _open_rows(path: Path, required: tuple[str, ...]) -> tuple[csv.DictReader[str], list[str]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RosterParseError(path, 0, f"cannot read file ({exc})") from exc
    reader = csv.DictReader(io.StringIO(text))
    header = list(reader.fieldnames or [])
    missing = [c for c in required if c not in header]
    if missing:
        raise RosterParseError(path, 1, f"missing columns {missing}; header is {header}")
    return reader, header


def _parse_int(path: Path, line: int, column: str, raw: str | None) -> int:
    try:
        return int((raw or "").strip())
    except ValueError:
        raise RosterParseError(path, line, f"{column} must be an integer, got {raw!r}") from None


def check_integrity(roster: Roster, programs: Programs) -> None:
    """Every program a student lists must exist."""
    dangling = roster.referenced_programs() - set(programs.capacities)
    if dangling:
        raise ReferentialIntegrityError("students list unknown programs", dangling)


def load_programs(path: Path | str) -> Programs:
    """Read a programs CSV.

    Raises:
        RosterParseError: Malformed row (with its line number).
        ReferentialIntegrityError: Duplicate program ids.
    """
    source = Path(path)
    reader, _ = _open_rows(source, PROGRAM_COLUMNS)
    programs: list[Program] = []
    for row in reader:
        line = reader.line_num
        pid = (row["program_id"] or "").strip()
        capacity = _parse_int(source, line, "capacity", row["capacity"])
        if not pid:
            raise RosterParseError(source, line, "empty program_id")
        if capacity < 1:
            raise RosterParseError(source, line, f"capacity must be positive, got {capacity}")
        programs.append(Program(id=pid, capacity=capacity))

    counts = Counter(p.id for p in programs)
    repeated = [pid for pid, count in counts.items() if count > 1]
    if repeated:
        raise ReferentialIntegrityError("duplicate program ids", repeated)
    logger.info("Loaded %d programs from %s", len(programs), source)
    return Programs(programs=programs)


def load_roster(path: Path | str, programs: Programs | None = None) -> Roster:
    """Read a roster CSV, optionally checking it against ``programs``.

    Raises:
        RosterParseError: Malformed row, repeated rank or program in one
            student's list, or ranks that are not 1..L.
        ReferentialIntegrityError: Programs listed but not defined.
    """
    source = Path(path)
    reader, header = _open_rows(source, ROSTER_COLUMNS)
    has_class = "priority_class" in header

    lists: dict[str, dict[int, str]] = {}
    classes: dict[str, dict[str, int]] = {}
    last_line: dict[str, int] = {}
    for row in reader:
        line = reader.line_num
        sid = (row["student_id"] or "").strip()
        pid = (row["program_id"] or "").strip()
        rank = _parse_int(source, line, "rank", row["rank"])
        if not sid or not pid:
            raise RosterParseError(source, line, "empty student_id or program_id")
        if rank < 1:
            raise RosterParseError(source, line, f"rank must start at 1, got {rank}")
        entries = lists.setdefault(sid, {})
        if rank in entries:
            raise RosterParseError(source, line, f"student {sid} repeats rank {rank}")
        if pid in entries.values():
            raise RosterParseError(source, line, f"student {sid} lists program {pid} twice")
        entries[rank] = pid
        last_line[sid] = line
        raw_class = (row.get("priority_class") or "").strip() if has_class else ""
        if raw_class:
            classes.setdefault(sid, {})[pid] = _parse_int(source, line, "priority_class", raw_class)

    students: list[Student] = []
    for sid, entries in lists.items():
        if sorted(entries) != list(range(1, len(entries) + 1)):
            raise RosterParseError(
                source, last_line[sid], f"student {sid} ranks are not 1..{len(entries)}"
            )
        try:
            students.append(
                Student(
                    id=sid,
                    preferences=tuple(entries[r] for r in range(1, len(entries) + 1)),
                    priority_classes=classes.get(sid, {}),
                )
            )
        except ValidationError as exc:
            raise RosterParseError(source, last_line[sid], str(exc)) from exc

    roster = Roster(students=students)
    if programs is not None:
        check_integrity(roster, programs)
    logger.info("Loaded %d students from %s", len(roster), source)
    return roster


def _write_text(path: Path | str, text: str) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise TableWriteError(target, exc) from exc
    return target


def write_roster(roster: Roster, path: Path | str) -> Path:
    """Write ``roster`` in the format ``load_roster`` reads."""
    with_class = any(s.priority_classes for s in roster.students)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow((*ROSTER_COLUMNS, "priority_class") if with_class else ROSTER_COLUMNS)
    for student in roster.students:
        for rank, pid in enumerate(student.preferences, start=1):
            row: list[object] = [student.id, rank, pid]
            if with_class:
                row.append(student.priority_classes.get(pid, ""))
            writer.writerow(row)
    return _write_text(path, buffer.getvalue())


def write_programs(programs: Programs, path: Path | str) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PROGRAM_COLUMNS)
    for program in programs.programs:
        writer.writerow((program.id, program.capacity))
    return _write_text(path, buffer.getvalue())
