"""School-choice counterfactuals with student-proposing deferred acceptance.

Programs hold their ``capacity`` best applicants under single tie-breaking:
one lottery rank per student, shared by every program, breaks ties inside
each priority class. A counterfactual cell perturbs the population (drop or
duplicate students), optionally replaces every list by a popularity-weighted
random one, and reports how many students land within their top-k choices.
"""

from __future__ import annotations

import heapq
import logging
from collections import deque
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from itertools import product

import numpy as np

from app.config import get_settings
from app.exceptions import InvalidInputError, ReferentialIntegrityError
from app.models.experiment import Table
from app.models.school import (
    Assignment,
    AssignmentSummary,
    PriorityOrders,
    Programs,
    Roster,
    Student,
)
from app.services.seeding import derive_seed, make_rng
from app.services.stats import hop_fractions_from_lists

logger = logging.getLogger(__name__)

# spawn-key domains of one counterfactual seed
_PERTURB, _RANDOMIZE, _LOTTERY = 0, 1, 2
_DELTA_OFFSET = 2**31


def apply_single_tiebreak(roster: Roster, programs: Programs, seed: int) -> PriorityOrders:
    """Draw one uniform lottery rank per student; every program uses the same one."""
    unknown = {p for s in roster.students for p in s.priority_classes} - set(programs.capacities)
    if unknown:
        raise ReferentialIntegrityError("priority classes name unknown programs", unknown)
    rng = make_rng(seed)
    ranks = rng.permutation(len(roster)).tolist()
    lottery = {student.id: rank for student, rank in zip(roster.students, ranks)}
    classes = {
        (program, student.id): cls
        for student in roster.students
        for program, cls in student.priority_classes.items()
    }
    return PriorityOrders(lottery=lottery, classes=classes)


def run_student_da(roster: Roster, programs: Programs, priorities: PriorityOrders) -> Assignment:
    """Student-optimal stable assignment.

    Each program keeps a heap of its held applicants with the lowest-priority
    one on top, so a full program compares a newcomer against a single entry.
    """
    capacities = programs.capacities
    dangling = roster.referenced_programs() - set(capacities)
    if dangling:
        raise ReferentialIntegrityError("students list unknown programs", dangling)

    lists = {s.id: s.preferences for s in roster.students}
    cursor = {s.id: 0 for s in roster.students}
    held: dict[str, list[tuple[int, int, str]]] = {p: [] for p in capacities}

    def worst_first(program: str, student: str) -> tuple[int, int, str]:
        cls, lot = priorities.key(program, student)
        return (-cls, -lot, student)

    queue = deque(s.id for s in roster.students)
    while queue:
        student: str | None = queue.popleft()
        while student is not None:
            prefs = lists[student]
            if cursor[student] == len(prefs):
                break
            program = prefs[cursor[student]]
            cursor[student] += 1
            entry = worst_first(program, student)
            heap = held[program]
            if len(heap) < capacities[program]:
                heapq.heappush(heap, entry)
                student = None
            elif entry > heap[0]:
                student = heapq.heapreplace(heap, entry)[2]

    assigned: dict[str, str | None] = {s.id: None for s in roster.students}
    for program, heap in held.items():
        for _, _, student in heap:
            assigned[student] = program
    return Assignment(assigned=assigned, filled={p: len(h) for p, h in held.items()})


def perturb_population(roster: Roster, delta: int, seed: int) -> Roster:
    """Drop ``-delta`` students without replacement, or append ``delta`` duplicates.

    Duplicates are copies of uniformly chosen students (with replacement) under
    fresh ids ``<id>~dup<n>``; they keep the original's priority classes.
    """
    size = len(roster)
    if delta == 0:
        return roster
    rng = make_rng(seed)
    if delta < 0:
        if -delta > size:
            raise InvalidInputError(f"cannot remove {-delta} students from a roster of {size}")
        keep = np.sort(rng.choice(size, size=size + delta, replace=False)).tolist()
        return Roster(students=[roster.students[i] for i in keep])

    if size == 0:
        raise InvalidInputError("cannot duplicate students of an empty roster")
    taken = {s.id for s in roster.students}
    copies: dict[str, int] = {}
    extra: list[Student] = []
    for i in rng.integers(0, size, size=delta).tolist():
        original = roster.students[i]
        n = copies.get(original.id, 0)
        while True:
            n += 1
            fresh = f"{original.id}~dup{n}"
            if fresh not in taken:
                break
        copies[original.id] = n
        taken.add(fresh)
        extra.append(original.model_copy(update={"id": fresh}))
    return Roster(students=[*roster.students, *extra])


def randomize_preferences(roster: Roster, seed: int) -> Roster:
    """Resample every list, keeping its length, with popularity-weighted draws.

    Program weights are the application counts of the input roster and stay
    fixed while sampling. Entries are drawn without replacement. Priority
    classes are dropped, so programs rank the new applicants by lottery alone.
    """
    counts = roster.application_counts()
    total = sum(counts.values())
    if total == 0:
        if any(s.preferences for s in roster.students):
            raise InvalidInputError("no applications to weight programs by")
        return roster
    program_ids = sorted(counts)
    weights = np.asarray([counts[p] for p in program_ids], dtype=float) / total

    rng = make_rng(seed)
    students: list[Student] = []
    for student in roster.students:
        length = len(student.preferences)
        if length > len(program_ids):
            raise InvalidInputError(
                f"student {student.id} lists {length} programs but only "
                f"{len(program_ids)} have applicants"
            )
        picks = rng.choice(len(program_ids), size=length, replace=False, p=weights).tolist()
        students.append(Student(id=student.id, preferences=tuple(program_ids[i] for i in picks)))
    return Roster(students=students)


def summarize_assignment(
    assignment: Assignment, roster: Roster, ks: Sequence[int]
) -> AssignmentSummary:
    """Fraction of students placed within their top k, per k, and the unassigned fraction.

    An empty roster reports zero for every fraction.
    """
    if not ks:
        raise InvalidInputError("ks must not be empty")
    positions: list[int | None] = []
    for student in roster.students:
        program = assignment.assigned.get(student.id)
        positions.append(None if program is None else student.preferences.index(program) + 1)

    size = len(positions)
    if size == 0:
        return AssignmentSummary(students=0, top_k={k: 0.0 for k in ks}, unassigned=0.0)
    top_k = {k: sum(1 for p in positions if p is not None and p <= k) / size for k in ks}
    unassigned = sum(1 for p in positions if p is None) / size
    return AssignmentSummary(students=size, top_k=top_k, unassigned=unassigned)


def _cell_seed(seed: int, domain: int, delta: int) -> int:
    return derive_seed(seed, domain, delta + _DELTA_OFFSET)


def run_cell(
    roster: Roster,
    programs: Programs,
    delta: int,
    seed: int,
    randomize: bool,
    ks: Sequence[int],
) -> AssignmentSummary:
    """One counterfactual: perturb, optionally randomize, tie-break, assign, summarize."""
    population = perturb_population(roster, delta, _cell_seed(seed, _PERTURB, delta))
    if randomize:
        population = randomize_preferences(population, _cell_seed(seed, _RANDOMIZE, delta))
    priorities = apply_single_tiebreak(population, programs, _cell_seed(seed, _LOTTERY, delta))
    assignment = run_student_da(population, programs, priorities)
    return summarize_assignment(assignment, population, ks)


# Worker-side copy of the inputs, set once per process by the pool initializer.
_shared: dict[str, object] = {}


def _init_worker(roster: Roster, programs: Programs, ks: tuple[int, ...]) -> None:
    _shared.update(roster=roster, programs=programs, ks=ks)


def _run_shared_cell(cell: tuple[int, int, bool]) -> AssignmentSummary:
    delta, seed, randomize = cell
    roster = _shared["roster"]
    programs = _shared["programs"]
    ks = _shared["ks"]
    assert isinstance(roster, Roster) and isinstance(programs, Programs)
    assert isinstance(ks, tuple)
    return run_cell(roster, programs, delta, seed, randomize, ks)


def run_counterfactual(
    roster: Roster,
    programs: Programs,
    deltas: Iterable[int],
    seeds: Iterable[int],
    *,
    randomize: bool = False,
    ks: Sequence[int] = (1, 3),
    workers: int | None = None,
) -> Table:
    """Top-k and unassigned fractions for every (delta, seed) cell.

    Columns: ``delta,seed,randomized,top<k>...,unassigned``. Rows follow
    ``deltas`` then ``seeds`` order whatever the worker count.
    """
    k_list = tuple(ks)
    if not k_list:
        raise InvalidInputError("ks must not be empty")
    cells = [(delta, seed, randomize) for delta, seed in product(deltas, seeds)]
    n_workers = get_settings().effective_workers if workers is None else max(1, workers)
    logger.info(
        "Running %d counterfactual cells over %d students (%d workers)",
        len(cells),
        len(roster),
        n_workers,
    )

    if n_workers <= 1 or len(cells) < 2:
        summaries = [run_cell(roster, programs, d, s, r, k_list) for d, s, r in cells]
    else:
        with ProcessPoolExecutor(
            max_workers=min(n_workers, len(cells)),
            initializer=_init_worker,
            initargs=(roster, programs, k_list),
        ) as pool:
            summaries = list(pool.map(_run_shared_cell, cells))

    table = Table(
        columns=("delta", "seed", "randomized", *(f"top{k}" for k in k_list), "unassigned")
    )
    for (delta, seed, randomized), summary in zip(cells, summaries):
        row: dict[str, object] = {"delta": delta, "seed": seed, "randomized": randomized}
        row.update({f"top{k}": summary.top_k[k] for k in k_list})
        row["unassigned"] = summary.unassigned
        table.rows.append(row)
    return table


def roster_hop_fractions(roster: Roster, sample: int, max_hops: int, seed: int) -> list[float]:
    """Within-h-hop fractions of student pairs; two students are adjacent when
    they list a common program."""
    index: dict[str, int] = {}
    lists = [[index.setdefault(p, len(index)) for p in s.preferences] for s in roster.students]
    return hop_fractions_from_lists(lists, len(index), sample, max_hops, make_rng(seed))
