"""Tests for result tables, traces and roster/program files."""

from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from app.config import OutputFormat
from app.exceptions import ReferentialIntegrityError, RosterParseError, TableWriteError
from app.models.experiment import Table
from app.models.school import Roster
from app.repositories.rosters import load_programs, load_roster, write_programs, write_roster
from app.repositories.tables import read_table, render_table, write_table
from app.repositories.traces import trace_to_table, write_trace
from app.services.da_core import run_mosm

pytestmark = pytest.mark.repository


@pytest.fixture
def sample_table() -> Table:
    return Table(
        columns=("n", "mean", "lazy"),
        rows=[
            {"lazy": False, "n": 10, "mean": 0.123456789},
            {"lazy": True, "n": 20, "mean": float("nan")},
        ],
    )


class TestTables:
    def test_csv_rendering(self, sample_table: Table) -> None:
        text = render_table(sample_table, OutputFormat.CSV)
        assert text == "n,mean,lazy\n10,0.123457,false\n20,nan,true\n"

    def test_significant_digits(self, sample_table: Table) -> None:
        text = render_table(sample_table, OutputFormat.CSV, sig_digits=3)
        assert text.splitlines()[1] == "10,0.123,false"

    def test_json_rendering(self, sample_table: Table) -> None:
        text = render_table(sample_table, OutputFormat.JSON)
        assert text.endswith("\n")
        rows = json.loads(text)
        assert rows == [
            {"n": 10, "mean": 0.123457, "lazy": False},
            {"n": 20, "mean": None, "lazy": True},
        ]
        assert list(rows[0]) == ["n", "mean", "lazy"]

    def test_write_and_read_csv(self, tmp_path: Path, sample_table: Table) -> None:
        path = write_table(sample_table, tmp_path / "nested" / "out.csv")
        assert path.read_bytes() == render_table(sample_table, OutputFormat.CSV).encode()
        loaded = read_table(path)
        assert loaded.columns == sample_table.columns
        assert loaded.rows[0] == {"n": 10, "mean": 0.123457, "lazy": False}
        assert math.isnan(loaded.rows[1]["mean"])

    def test_write_and_read_json(self, tmp_path: Path, sample_table: Table) -> None:
        path = write_table(sample_table, tmp_path / "out.json", OutputFormat.JSON)
        loaded = read_table(path, OutputFormat.JSON)
        assert loaded.columns == ("n", "mean", "lazy")
        assert loaded.rows[0]["lazy"] is False
        assert math.isnan(loaded.rows[1]["mean"])

    def test_header_only_csv(self, tmp_path: Path) -> None:
        path = write_table(Table(columns=("a", "b")), tmp_path / "empty.csv")
        assert path.read_text() == "a,b\n"
        assert read_table(path) == Table(columns=("a", "b"))

    def test_ragged_csv(self, tmp_path: Path) -> None:
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1,2\n3\n")
        with pytest.raises(RosterParseError) as info:
            read_table(path)
        assert info.value.line == 3

    def test_malformed_json(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text('{"a": 1}')
        with pytest.raises(RosterParseError):
            read_table(path, OutputFormat.JSON)

    def test_unwritable_target(self, tmp_path: Path, sample_table: Table) -> None:
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(TableWriteError):
            write_table(sample_table, blocker / "out.csv")


class TestTraces:
    def test_trace_table(self, two_men_one_woman) -> None:
        trace = run_mosm(two_men_one_woman).trace
        table = trace_to_table(trace)
        assert table.columns == ("t", "delta_m", "delta_w")
        assert table.column("t") == [0, 1, 2]
        assert table.column("delta_m") == [0, 0, 1]
        assert table.column("delta_w") == [1, 0, 0]

    def test_acceptance_column(self, tmp_path: Path, two_men_one_woman) -> None:
        trace = run_mosm(two_men_one_woman, record_acceptance_prob=True).trace
        table = trace_to_table(trace)
        assert table.columns[-1] == "p_t"
        assert math.isnan(table.rows[0]["p_t"])
        path = write_trace(trace, tmp_path / "trace.csv")
        assert path.read_text().splitlines()[1] == "0,0,1,nan"


class TestRosters:
    def test_load_fixture_files(self, roster_files: tuple[Path, Path]) -> None:
        roster_path, programs_path = roster_files
        programs = load_programs(programs_path)
        roster = load_roster(roster_path, programs)
        assert programs.capacities == {"alpha": 1, "beta": 1, "gamma": 2}
        assert [s.id for s in roster.students] == ["s1", "s2", "s3"]
        assert roster.students[0].preferences == ("alpha", "beta")
        assert roster.students[1].priority_classes == {"beta": 1}
        # rows may come in any rank order
        assert roster.students[2].preferences == ("gamma", "alpha")

    def test_write_then_load(self, tmp_path: Path, small_roster: Roster, small_programs) -> None:
        write_roster(small_roster, tmp_path / "roster.csv")
        write_programs(small_programs, tmp_path / "programs.csv")
        assert load_programs(tmp_path / "programs.csv") == small_programs
        assert load_roster(tmp_path / "roster.csv", small_programs) == small_roster

    @pytest.mark.parametrize(
        "body,line",
        [
            ("s1,1,alpha\ns1,x,beta\n", 3),
            ("s1,1,alpha\ns1,1,beta\n", 3),
            ("s1,1,alpha\ns1,2,alpha\n", 3),
            ("s1,1,alpha\ns1,3,beta\n", 3),
            ("s1,0,alpha\n", 2),
            (",1,alpha\n", 2),
        ],
    )
    def test_malformed_roster(self, tmp_path: Path, body: str, line: int) -> None:
        path = tmp_path / "roster.csv"
        path.write_text("student_id,rank,program_id\n" + body)
        with pytest.raises(RosterParseError) as info:
            load_roster(path)
        assert info.value.line == line

    def test_missing_columns(self, tmp_path: Path) -> None:
        path = tmp_path / "roster.csv"
        path.write_text("student,rank\ns1,1\n")
        with pytest.raises(RosterParseError) as info:
            load_roster(path)
        assert info.value.line == 1

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(RosterParseError):
            load_roster(tmp_path / "absent.csv")

    def test_unknown_program(self, tmp_path: Path, small_programs) -> None:
        path = tmp_path / "roster.csv"
        path.write_text("student_id,rank,program_id\ns1,1,alpha\ns2,1,omega\n")
        with pytest.raises(ReferentialIntegrityError) as info:
            load_roster(path, small_programs)
        assert info.value.offenders == ["omega"]

    def test_duplicate_program_ids(self, tmp_path: Path) -> None:
        path = tmp_path / "programs.csv"
        path.write_text("program_id,capacity\nalpha,1\nalpha,2\n")
        with pytest.raises(ReferentialIntegrityError):
            load_programs(path)

    @pytest.mark.parametrize("capacity", ["0", "two"])
    def test_bad_capacity(self, tmp_path: Path, capacity: str) -> None:
        path = tmp_path / "programs.csv"
        path.write_text(f"program_id,capacity\nalpha,1\nbeta,{capacity}\n")
        with pytest.raises(RosterParseError) as info:
            load_programs(path)
        assert info.value.line == 3
