"""Schemas for school-choice counterfactuals: students, programs, lotteries, assignments."""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass, field

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Applicants without an explicit priority class rank behind every class.
NO_PRIORITY_CLASS = sys.maxsize


class Student(BaseModel):
    """One applicant and their ranked list of program ids."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, examples=["s-0001"])
    preferences: tuple[str, ...] = Field(..., description="Program ids, most preferred first.")
    priority_classes: dict[str, int] = Field(
        default_factory=dict,
        description="Coarse priority class per listed program; lower ranks first.",
    )

    @model_validator(mode="after")
    def check_lists(self) -> Student:
        seen = Counter(self.preferences)
        repeated = sorted(p for p, count in seen.items() if count > 1)
        if repeated:
            raise ValueError(f"student {self.id} lists {repeated} more than once")
        unlisted = sorted(set(self.priority_classes) - set(seen))
        if unlisted:
            raise ValueError(f"student {self.id} has priority classes for unlisted {unlisted}")
        return self


class Roster(BaseModel):
    """Applicants in file order."""

    students: list[Student] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_unique_ids(self) -> Roster:
        counts = Counter(s.id for s in self.students)
        repeated = sorted(sid for sid, count in counts.items() if count > 1)
        if repeated:
            raise ValueError(f"duplicate student ids: {repeated}")
        return self

    def __len__(self) -> int:
        return len(self.students)

    def application_counts(self) -> Counter[str]:
        """How many students list each program."""
        return Counter(p for s in self.students for p in s.preferences)

    def referenced_programs(self) -> set[str]:
        return {p for s in self.students for p in s.preferences}


class Program(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, examples=["p-017"])
    capacity: int = Field(..., ge=1, examples=[120])


class Programs(BaseModel):
    programs: list[Program] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_unique_ids(self) -> Programs:
        counts = Counter(p.id for p in self.programs)
        repeated = sorted(pid for pid, count in counts.items() if count > 1)
        if repeated:
            raise ValueError(f"duplicate program ids: {repeated}")
        return self

    @property
    def capacities(self) -> dict[str, int]:
        return {p.id: p.capacity for p in self.programs}

    @property
    def total_capacity(self) -> int:
        return sum(p.capacity for p in self.programs)


@dataclass(frozen=True)
class PriorityOrders:
    """Program priorities under single tie-breaking.

    Every program orders applicants by (priority class, lottery); the lottery
    is one permutation rank per student shared by all programs.
    """

    lottery: dict[str, int]
    classes: dict[tuple[str, str], int] = field(default_factory=dict)

    def key(self, program: str, student: str) -> tuple[int, int]:
        """Sort key of ``student`` at ``program``; smaller is higher priority."""
        return (
            self.classes.get((program, student), NO_PRIORITY_CLASS),
            self.lottery[student],
        )

    def ranking(self, program: str, students: list[str]) -> list[str]:
        return sorted(students, key=lambda s: self.key(program, s))


class Assignment(BaseModel):
    """Student to program (``None`` when unassigned) plus seats filled per program."""

    assigned: dict[str, str | None]
    filled: dict[str, int]

    @property
    def unassigned(self) -> list[str]:
        return [s for s, p in self.assigned.items() if p is None]


class AssignmentSummary(BaseModel):
    """Fractions of students assigned within their top-k choices, and unassigned."""

    students: int = Field(..., ge=0)
    top_k: dict[int, float]
    unassigned: float = Field(..., ge=0.0, le=1.0)
