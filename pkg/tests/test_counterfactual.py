"""Tests for school-choice assignment and counterfactual perturbations."""

from __future__ import annotations

import numpy as np
import pytest

from app.exceptions import InvalidInputError, ReferentialIntegrityError
from app.models.school import (
    Assignment,
    PriorityOrders,
    Program,
    Programs,
    Roster,
    Student,
)
from app.services.counterfactual import (
    apply_single_tiebreak,
    perturb_population,
    randomize_preferences,
    roster_hop_fractions,
    run_cell,
    run_counterfactual,
    run_student_da,
    summarize_assignment,
)
from app.services.oracle import enumerate_stable_assignments

pytestmark = pytest.mark.service


def _blocking_students(
    roster: Roster, programs: Programs, priorities: PriorityOrders, assignment: Assignment
) -> list[tuple[str, str]]:
    """(student, program) pairs where the student would displace someone or take a free seat."""
    capacities = programs.capacities
    holders: dict[str, list[str]] = {p: [] for p in capacities}
    for student, program in assignment.assigned.items():
        if program is not None:
            holders[program].append(student)
    blocking = []
    for student in roster.students:
        current = assignment.assigned[student.id]
        prefs = student.preferences
        stop = prefs.index(current) if current is not None else len(prefs)
        for program in prefs[:stop]:
            mine = priorities.key(program, student.id)
            held = holders[program]
            if len(held) < capacities[program]:
                blocking.append((student.id, program))
            elif any(mine < priorities.key(program, h) for h in held):
                blocking.append((student.id, program))
    return blocking


def _random_instance(rng: np.random.Generator) -> tuple[Roster, Programs, PriorityOrders]:
    program_ids = ["p0", "p1", "p2"]
    programs = Programs(
        programs=[Program(id=p, capacity=int(rng.integers(1, 3))) for p in program_ids]
    )
    students = []
    for s in range(int(rng.integers(1, 6))):
        length = int(rng.integers(1, 4))
        prefs = tuple(program_ids[i] for i in rng.choice(3, size=length, replace=False).tolist())
        classes = {p: int(rng.integers(0, 2)) for p in prefs if rng.random() < 0.3}
        students.append(Student(id=f"s{s}", preferences=prefs, priority_classes=classes))
    roster = Roster(students=students)
    return roster, programs, apply_single_tiebreak(roster, programs, int(rng.integers(0, 2**32)))


class TestStudentDA:
    def test_everyone_gets_first_choice(self) -> None:
        roster = Roster(
            students=[
                Student(id="a", preferences=("x", "y")),
                Student(id="b", preferences=("y", "x")),
            ]
        )
        programs = Programs(programs=[Program(id="x", capacity=1), Program(id="y", capacity=1)])
        assignment = run_student_da(roster, programs, apply_single_tiebreak(roster, programs, 1))
        assert assignment.assigned == {"a": "x", "b": "y"}

    def test_lottery_decides_single_seat(self) -> None:
        roster = Roster(
            students=[Student(id="a", preferences=("x",)), Student(id="b", preferences=("x",))]
        )
        programs = Programs(programs=[Program(id="x", capacity=1)])
        priorities = PriorityOrders(lottery={"a": 1, "b": 0})
        assignment = run_student_da(roster, programs, priorities)
        assert assignment.assigned == {"a": None, "b": "x"}
        assert assignment.unassigned == ["a"]
        assert assignment.filled == {"x": 1}

    def test_priority_class_beats_lottery(self) -> None:
        roster = Roster(
            students=[
                Student(id="a", preferences=("x",), priority_classes={"x": 0}),
                Student(id="b", preferences=("x",)),
            ]
        )
        programs = Programs(programs=[Program(id="x", capacity=1)])
        priorities = PriorityOrders(lottery={"a": 1, "b": 0}, classes={("x", "a"): 0})
        assert run_student_da(roster, programs, priorities).assigned["a"] == "x"

    def test_capacity_and_stability(self, small_roster: Roster, small_programs: Programs) -> None:
        for seed in range(10):
            priorities = apply_single_tiebreak(small_roster, small_programs, seed)
            assignment = run_student_da(small_roster, small_programs, priorities)
            for program, capacity in small_programs.capacities.items():
                placed = sum(1 for p in assignment.assigned.values() if p == program)
                assert placed == assignment.filled[program] <= capacity
            assert _blocking_students(small_roster, small_programs, priorities, assignment) == []

    def test_rejects_unknown_program(self, small_programs: Programs) -> None:
        roster = Roster(students=[Student(id="a", preferences=("delta",))])
        with pytest.raises(ReferentialIntegrityError):
            run_student_da(roster, small_programs, apply_single_tiebreak(roster, small_programs, 0))

    def test_priority_class_at_unknown_program(self, small_programs: Programs) -> None:
        student = Student(id="a", preferences=("alpha", "delta"), priority_classes={"delta": 1})
        with pytest.raises(ReferentialIntegrityError) as info:
            apply_single_tiebreak(Roster(students=[student]), small_programs, 0)
        assert info.value.offenders == ["delta"]

    def test_lottery_is_a_permutation(self, small_roster: Roster, small_programs: Programs) -> None:
        priorities = apply_single_tiebreak(small_roster, small_programs, 5)
        assert sorted(priorities.lottery.values()) == list(range(len(small_roster)))
        assert priorities.classes == {("beta", "s3"): 1}

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_seat_splitting_enumeration(self, seed: int) -> None:
        roster, programs, priorities = _random_instance(np.random.default_rng(seed))
        stable = enumerate_stable_assignments(roster, programs, priorities)
        assignment = run_student_da(roster, programs, priorities)
        assert stable[0].assigned == assignment.assigned
        for other in stable:
            assert _blocking_students(roster, programs, priorities, other) == []


class TestPerturbation:
    def test_zero_delta_is_identity(self, small_roster: Roster) -> None:
        assert perturb_population(small_roster, 0, 1) is small_roster

    def test_remove_students(self, small_roster: Roster) -> None:
        smaller = perturb_population(small_roster, -2, 4)
        ids = [s.id for s in smaller.students]
        assert len(ids) == 3
        original = [s.id for s in small_roster.students]
        assert ids == [sid for sid in original if sid in ids]

    def test_remove_everyone(self, small_roster: Roster) -> None:
        assert len(perturb_population(small_roster, -5, 4)) == 0

    def test_rejects_over_removal(self, small_roster: Roster) -> None:
        with pytest.raises(InvalidInputError):
            perturb_population(small_roster, -6, 4)

    def test_duplicates_get_fresh_ids(self, small_roster: Roster) -> None:
        bigger = perturb_population(small_roster, 12, 9)
        assert len(bigger) == 17
        extra = bigger.students[5:]
        by_id = {s.id: s for s in small_roster.students}
        for student in extra:
            original_id, _, suffix = student.id.partition("~dup")
            assert suffix.isdigit()
            original = by_id[original_id]
            assert student.preferences == original.preferences
            assert student.priority_classes == original.priority_classes

    def test_rejects_duplicating_empty_roster(self) -> None:
        with pytest.raises(InvalidInputError):
            perturb_population(Roster(), 1, 0)


class TestRandomization:
    def test_unlisted_programs_never_drawn(self) -> None:
        roster = Roster(
            students=[
                Student(id=f"s{i}", preferences=("alpha", "beta") if i % 2 else ("beta",))
                for i in range(50)
            ]
        )
        shuffled = randomize_preferences(roster, 3)
        drawn = {p for s in shuffled.students for p in s.preferences}
        assert drawn <= {"alpha", "beta"}

    def test_lengths_kept_and_classes_dropped(self, small_roster: Roster) -> None:
        shuffled = randomize_preferences(small_roster, 11)
        assert [len(s.preferences) for s in shuffled.students] == [
            len(s.preferences) for s in small_roster.students
        ]
        assert [s.id for s in shuffled.students] == [s.id for s in small_roster.students]
        assert all(not s.priority_classes for s in shuffled.students)
        assert all(len(set(s.preferences)) == len(s.preferences) for s in shuffled.students)

    def test_popularity_weighting(self) -> None:
        students = [Student(id=f"a{i}", preferences=("alpha",)) for i in range(300)]
        students += [Student(id=f"b{i}", preferences=("beta",)) for i in range(100)]
        shuffled = randomize_preferences(Roster(students=students), 17)
        share = sum(1 for s in shuffled.students if s.preferences == ("alpha",)) / 400
        sigma = (0.75 * 0.25 / 400) ** 0.5
        assert abs(share - 0.75) <= 3 * sigma

    def test_same_seed_same_lists(self, small_roster: Roster) -> None:
        assert randomize_preferences(small_roster, 2) == randomize_preferences(small_roster, 2)


class TestSummary:
    def test_fractions(self, small_roster: Roster) -> None:
        assignment = Assignment(
            assigned={"s1": "beta", "s2": "alpha", "s3": None, "s4": "gamma", "s5": "gamma"},
            filled={"alpha": 1, "beta": 1, "gamma": 2},
        )
        summary = summarize_assignment(assignment, small_roster, [1, 2, 3])
        assert summary.students == 5
        assert summary.top_k == {1: 2 / 5, 2: 3 / 5, 3: 4 / 5}
        assert summary.unassigned == pytest.approx(1 / 5)

    def test_empty_roster(self) -> None:
        summary = summarize_assignment(Assignment(assigned={}, filled={}), Roster(), [1, 3])
        assert summary.top_k == {1: 0.0, 3: 0.0}
        assert summary.unassigned == 0.0

    def test_rejects_empty_ks(self, small_roster: Roster) -> None:
        with pytest.raises(InvalidInputError):
            summarize_assignment(Assignment(assigned={}, filled={}), small_roster, [])


class TestCounterfactual:
    def test_cell_is_seeded(self, small_roster: Roster, small_programs: Programs) -> None:
        a = run_cell(small_roster, small_programs, 3, 7, True, (1, 2))
        b = run_cell(small_roster, small_programs, 3, 7, True, (1, 2))
        assert a == b
        assert a.top_k[1] <= a.top_k[2]
        assert a.students == 8

    def test_table_layout(self, small_roster: Roster, small_programs: Programs) -> None:
        table = run_counterfactual(small_roster, small_programs, [-1, 0, 2], [5, 6], ks=(1, 3))
        assert table.columns == ("delta", "seed", "randomized", "top1", "top3", "unassigned")
        assert [(r["delta"], r["seed"]) for r in table.rows] == [
            (-1, 5), (-1, 6), (0, 5), (0, 6), (2, 5), (2, 6)
        ]
        for row in table.rows:
            assert row["top1"] <= row["top3"]
            assert row["top3"] + row["unassigned"] <= 1.0 + 1e-12

    def test_worker_count_does_not_change_rows(
        self, small_roster: Roster, small_programs: Programs
    ) -> None:
        serial = run_counterfactual(
            small_roster, small_programs, [-2, 3], [1, 2, 3], randomize=True, workers=1
        )
        parallel = run_counterfactual(
            small_roster, small_programs, [-2, 3], [1, 2, 3], randomize=True, workers=2
        )
        assert serial.rows == parallel.rows

    def test_more_students_fill_fewer_first_choices(self) -> None:
        roster = Roster(
            students=[Student(id=f"s{i}", preferences=("x", "y", "z")) for i in range(6)]
        )
        programs = Programs(
            programs=[Program(id=p, capacity=2) for p in ("x", "y", "z")]
        )
        table = run_counterfactual(roster, programs, [-3, 0, 6], [1], ks=(1,))
        # x always seats exactly two students
        assert table.column("top1") == pytest.approx([2 / 3, 2 / 6, 2 / 12])
        assert table.column("unassigned") == pytest.approx([0.0, 0.0, 6 / 12])


def test_roster_hop_fractions(small_roster: Roster) -> None:
    # only (s1, s5) and (s3, s5) share no program
    assert roster_hop_fractions(small_roster, 5, 2, 0) == pytest.approx([0.8, 1.0])
