"""Market configuration and the materialized preference structure.

``MarketConfig`` is a validated pydantic model (it travels through the CLI, the
HTTP API and worker processes). ``Market`` holds numpy arrays and is a plain
frozen dataclass.

Indices are 0-based. Ranks are 1-based: rank 1 is the most preferred partner.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import InvalidInputError

SEED_MAX = 2**64 - 1


class MarketConfig(BaseModel):
    """Parameters of one random market draw: n women, n+k men, men's degree d."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of women.", examples=[1001])
    k: int = Field(default=0, description="Imbalance; the market has n+k men.", examples=[-1])
    d: int = Field(..., ge=1, description="Length of every man's preference list.", examples=[20])
    seed: int = Field(default=0, ge=0, le=SEED_MAX, description="64-bit generator seed.")

    @model_validator(mode="after")
    def check_ranges(self) -> MarketConfig:
        """Enforce d <= n and a non-negative number of men."""
        if self.d > self.n:
            raise ValueError(f"d={self.d} exceeds the number of women n={self.n}")
        if self.n + self.k < 0:
            raise ValueError(f"n+k={self.n + self.k} men is negative")
        return self

    @property
    def n_men(self) -> int:
        return self.n + self.k


@dataclass(frozen=True, eq=False)
class Market:
    """Preference structure of a partially connected market.

    Attributes:
        n_women: Number of women.
        men_prefs: ``(n_men, d)`` array; row i is man i's ranked list of women.
        priority: ``(n_men, d)`` array; ``priority[i, r]`` is the rank woman
            ``men_prefs[i, r]`` gives man i among her neighbors.
        women_ptr: CSR offsets of length ``n_women + 1`` into ``women_men``.
        women_men: Concatenated priority lists of the women.
        women_men_rank: Aligned with ``women_men``; the rank each listed man
            gives that woman.
    """

    n_women: int
    men_prefs: np.ndarray
    priority: np.ndarray
    women_ptr: np.ndarray
    women_men: np.ndarray
    women_men_rank: np.ndarray

    @property
    def n_men(self) -> int:
        return int(self.men_prefs.shape[0])

    @property
    def d(self) -> int:
        return int(self.men_prefs.shape[1])

    @property
    def k(self) -> int:
        return self.n_men - self.n_women

    @property
    def degrees(self) -> np.ndarray:
        """Number of men who listed each woman, |M_j|."""
        return np.diff(self.women_ptr)

    def women_prefs(self, j: int) -> np.ndarray:
        """Woman j's priority list over her neighbors, best first."""
        return self.women_men[self.women_ptr[j] : self.women_ptr[j + 1]]

    @cached_property
    def _man_rank_index(self) -> list[dict[int, int]]:
        return [{int(j): r + 1 for r, j in enumerate(row)} for row in self.men_prefs.tolist()]

    @cached_property
    def _woman_rank_index(self) -> list[dict[int, int]]:
        index: list[dict[int, int]] = []
        for j in range(self.n_women):
            index.append({int(i): r + 1 for r, i in enumerate(self.women_prefs(j).tolist())})
        return index

    def man_rank(self, i: int, j: int) -> int | None:
        """Rank man i gives woman j, or ``None`` when she is not on his list."""
        return self._man_rank_index[i].get(j)

    def woman_rank(self, j: int, i: int) -> int | None:
        """Rank woman j gives man i, or ``None`` when he did not list her."""
        return self._woman_rank_index[j].get(i)

    def same_as(self, other: Market) -> bool:
        """Bit-level equality of every preference array."""
        return self.n_women == other.n_women and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in (
                "men_prefs",
                "priority",
                "women_ptr",
                "women_men",
                "women_men_rank",
            )
        )

    def validate(self) -> None:
        """Check the structural invariants; raise ``InvalidInputError`` on violation."""
        n_men, d = self.men_prefs.shape if self.men_prefs.ndim == 2 else (0, 0)
        if self.men_prefs.ndim != 2 or self.priority.shape != self.men_prefs.shape:
            raise InvalidInputError("men_prefs and priority must be equally shaped 2-d arrays")
        for i, row in enumerate(self.men_prefs.tolist()):
            if len(set(row)) != d:
                raise InvalidInputError(f"man {i} lists a woman twice")
            if any(j < 0 or j >= self.n_women for j in row):
                raise InvalidInputError(f"man {i} lists a woman outside 0..{self.n_women - 1}")
        if int(self.women_ptr[-1]) != n_men * d:
            raise InvalidInputError("women's lists do not cover every man's entries exactly once")
        for j in range(self.n_women):
            listed = set(self.women_prefs(j).tolist())
            expected = {i for i in range(n_men) if self.man_rank(i, j) is not None}
            if listed != expected or len(listed) != len(self.women_prefs(j)):
                raise InvalidInputError(f"woman {j}'s list differs from the men who listed her")
