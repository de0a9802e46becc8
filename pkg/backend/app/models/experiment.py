"""Experiment schemas: result tables and threshold searches."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from pydantic import BaseModel, Field, model_validator


@dataclass
class Table:
    """Rows of named values with a fixed column order."""

    columns: tuple[str, ...]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        return [row[name] for row in self.rows]


class ThresholdKind(str, Enum):
    """Which phase transition a threshold search locates."""

    RANK_GAP = "rank_gap"
    UNMATCHED_MEN = "unmatched_men"
    CONNECTIVITY = "connectivity"


DEFAULT_TARGETS: dict[ThresholdKind, float] = {
    ThresholdKind.RANK_GAP: 1.15,
    ThresholdKind.UNMATCHED_MEN: 0.5,
    ThresholdKind.CONNECTIVITY: 2.0,
}


class ThresholdSpec(BaseModel):
    """Bisection over integer d for the smallest degree satisfying a Monte Carlo predicate.

    rank_gap: E[R_WOMEN] / E[R_MEN] >= target.
    unmatched_men: E[delta_m] <= target.
    connectivity: E[components] <= target.
    """

    kind: ThresholdKind
    n: int = Field(..., ge=2, description="Number of women; the market has n+k men.")
    k: int = Field(default=-1, description="Imbalance; thresholds use one fewer man than women.")
    reps: int = Field(default=500, ge=1, description="Replications per probed d.")
    d_lo: int = Field(default=1, ge=1)
    d_hi: int | None = Field(default=None, description="Upper search bound; defaults to n.")
    target: float | None = Field(default=None, description="Overrides the kind's default target.")

    @model_validator(mode="after")
    def check_bounds(self) -> ThresholdSpec:
        if self.d_hi is None:
            self.d_hi = self.n
        if not self.d_lo < self.d_hi <= self.n:
            raise ValueError(
                f"need d_lo < d_hi <= n, got [{self.d_lo}, {self.d_hi}] with n={self.n}"
            )
        if self.n + self.k < 1:
            raise ValueError(f"n+k={self.n + self.k} leaves no men")
        return self

    @property
    def resolved_target(self) -> float:
        return DEFAULT_TARGETS[self.kind] if self.target is None else self.target

    @property
    def upper(self) -> int:
        return self.d_hi if self.d_hi is not None else self.n


class ThresholdResult(BaseModel):
    """Outcome of one threshold search."""

    kind: ThresholdKind
    n: int
    reps: int
    d_star: int
    probes: int = Field(..., description="Number of distinct d values simulated.")
    estimates: dict[int, float] = Field(
        default_factory=dict, description="Monte Carlo statistic at each probed d."
    )
