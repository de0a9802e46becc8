"""Matchings and deferred-acceptance run records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNMATCHED = -1


@dataclass(frozen=True, eq=False)
class Matching:
    """Partial bijection between men and women; ``UNMATCHED`` marks a self-match."""

    man_to_woman: np.ndarray
    woman_to_man: np.ndarray

    @classmethod
    def from_man_side(cls, man_to_woman: np.ndarray | list[int], n_women: int) -> Matching:
        husbands = np.full(n_women, UNMATCHED, dtype=np.int64)
        wives = np.asarray(man_to_woman, dtype=np.int64)
        for i, j in enumerate(wives.tolist()):
            if j != UNMATCHED:
                husbands[j] = i
        return cls(man_to_woman=wives, woman_to_man=husbands)

    @property
    def unmatched_men(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.man_to_woman == UNMATCHED).tolist())

    @property
    def unmatched_women(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.woman_to_man == UNMATCHED).tolist())

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.man_to_woman.tolist()) if j != UNMATCHED]

    def is_consistent(self) -> bool:
        """True when the two directions describe the same partial bijection."""
        for i, j in enumerate(self.man_to_woman.tolist()):
            if j != UNMATCHED and (j >= len(self.woman_to_man) or self.woman_to_man[j] != i):
                return False
        for j, i in enumerate(self.woman_to_man.tolist()):
            if i != UNMATCHED and (i >= len(self.man_to_woman) or self.man_to_woman[i] != j):
                return False
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matching):
            return NotImplemented
        return np.array_equal(self.man_to_woman, other.man_to_woman) and np.array_equal(
            self.woman_to_man, other.woman_to_man
        )

    def __hash__(self) -> int:
        return hash(tuple(self.man_to_woman.tolist()))


@dataclass(frozen=True, eq=False)
class RunTrace:
    """Instrumentation of one deferred-acceptance run.

    ``delta_m_series[s]`` and ``delta_w_series[s]`` are the numbers of
    currently unmatched men and women after proposal ``times[s]``. Index 0 is
    time 0 and the last index is always time ``tau``. ``w_counts`` and
    ``m_counts`` are the per-agent proposal counts at termination (received by
    the receiving side, made by the proposing side).
    """

    tau: int
    times: np.ndarray
    delta_m_series: np.ndarray
    delta_w_series: np.ndarray
    w_counts: np.ndarray
    m_counts: np.ndarray
    decimation: int = 1
    acceptance_prob_series: np.ndarray | None = None

    @property
    def final_delta_m(self) -> int:
        return int(self.delta_m_series[-1])

    @property
    def final_delta_w(self) -> int:
        return int(self.delta_w_series[-1])


@dataclass(frozen=True, eq=False)
class AgentRanks:
    """Per-agent ranks of partners, unmatched agents included per the
    unmatched-rank convention (list length plus one)."""

    men: np.ndarray
    women: np.ndarray


@dataclass(frozen=True, eq=False)
class DAResult:
    matching: Matching
    trace: RunTrace
    ranks: AgentRanks
