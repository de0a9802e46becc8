"""Independent checks for the matching engines.

Brute-force enumeration of stable matchings on small instances, a direct
blocking-pair search, and the balls-into-bins process that dominates the
number of women still waiting for a first proposal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from app.config import get_settings
from app.exceptions import EnumerationLimitError, InvalidConfigError
from app.models.market import Market, MarketConfig
from app.models.matching import UNMATCHED, Matching
from app.models.school import Assignment, PriorityOrders, Programs, Roster
from app.services.da_core import run_mosm, run_wosm
from app.services.market_gen import generate_market
from app.services.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------


def _held_ranks(market: Market, matching: Matching) -> list[int]:
    """Rank each woman gives her current partner; degree+1 when single."""
    degrees = market.degrees.tolist()
    out = []
    for j, i in enumerate(matching.woman_to_man.tolist()):
        rank = market.woman_rank(j, i) if i != UNMATCHED else None
        out.append(rank if rank is not None else degrees[j] + 1)
    return out


def find_blocking_pair(market: Market, matching: Matching) -> tuple[int, int] | None:
    """Some (man, woman) who both prefer each other to their partners, or ``None``."""
    held = _held_ranks(market, matching)
    d = market.d
    priority = market.priority.tolist()
    for i, row in enumerate(market.men_prefs.tolist()):
        wife = int(matching.man_to_woman[i])
        current = market.man_rank(i, wife) if wife != UNMATCHED else None
        stop = (current if current is not None else d + 1) - 1
        for slot in range(stop):
            j = row[slot]
            if priority[i][slot] < held[j]:
                return (i, j)
    return None


def is_stable(market: Market, matching: Matching) -> bool:
    return find_blocking_pair(market, matching) is None


# ---------------------------------------------------------------------------
# Enumeration core
# ---------------------------------------------------------------------------


def _stable_matchings(
    lists: list[list[int]],
    receiver_rank: list[dict[int, int]],
    n_receivers: int,
) -> list[tuple[int, ...]]:
    """Every stable matching of a two-sided instance, proposer side as tuples.

    Proposers are assigned in index order to a listed receiver or to nobody.
    A branch is cut as soon as two decided agents form a blocking pair;
    receivers left single are checked once all proposers are placed.
    """
    n = len(lists)
    assign = [UNMATCHED] * n
    partner = [UNMATCHED] * n_receivers
    own_rank = [{r: pos for pos, r in enumerate(row)} for row in lists]
    found: list[tuple[int, ...]] = []

    def rank_of(i: int) -> int:
        j = assign[i]
        return own_rank[i][j] if j != UNMATCHED else len(lists[i])

    def blocks_with_decided(i: int) -> bool:
        # i against receivers already held by earlier proposers
        mine = rank_of(i)
        for pos in range(mine):
            j = lists[i][pos]
            h = partner[j]
            if h != UNMATCHED and receiver_rank[j][i] < receiver_rank[j][h]:
                return True
        # earlier proposers against the receiver i just took
        j = assign[i]
        if j != UNMATCHED:
            for h in range(i):
                pos = own_rank[h].get(j)
                if pos is None or pos >= rank_of(h):
                    continue
                if receiver_rank[j][h] < receiver_rank[j][i]:
                    return True
        return False

    def complete_is_stable() -> bool:
        for i in range(n):
            for pos in range(rank_of(i)):
                if partner[lists[i][pos]] == UNMATCHED:
                    return False
        return True

    def place(i: int) -> None:
        if i == n:
            if complete_is_stable():
                found.append(tuple(assign))
            return
        for j in [*lists[i], UNMATCHED]:
            if j != UNMATCHED and partner[j] != UNMATCHED:
                continue
            assign[i] = j
            if j != UNMATCHED:
                partner[j] = i
            if not blocks_with_decided(i):
                place(i + 1)
            if j != UNMATCHED:
                partner[j] = UNMATCHED
            assign[i] = UNMATCHED

    place(0)
    return found


def _guard(size: int, limit: int | None) -> None:
    bound = get_settings().ENUMERATION_MAX_AGENTS if limit is None else limit
    if size > bound:
        raise EnumerationLimitError(size, bound)


def enumerate_stable_matchings(market: Market, *, limit: int | None = None) -> list[Matching]:
    """All stable matchings, ordered from the man-optimal to the woman-optimal pole.

    Sorted by the men's total rank (ties broken by the assignment itself), so
    the first entry is the man-optimal and the last the woman-optimal matching.

    Raises:
        EnumerationLimitError: Either side has more agents than ``limit``
            (``ENUMERATION_MAX_AGENTS`` by default).
    """
    _guard(max(market.n_men, market.n_women), limit)
    lists = market.men_prefs.tolist()
    receiver_rank = [
        {int(i): r + 1 for r, i in enumerate(market.women_prefs(j).tolist())}
        for j in range(market.n_women)
    ]
    found = _stable_matchings(lists, receiver_rank, market.n_women)
    d = market.d

    def men_total(m: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
        total = sum(lists[i].index(j) + 1 if j != UNMATCHED else d + 1 for i, j in enumerate(m))
        return (total, m)

    return [Matching.from_man_side(list(m), market.n_women) for m in sorted(found, key=men_total)]


def enumerate_stable_assignments(
    roster: Roster,
    programs: Programs,
    priorities: PriorityOrders,
    *,
    limit: int | None = None,
) -> list[Assignment]:
    """All stable assignments via seat splitting.

    A program of capacity c becomes c unit seats; every student ranks a
    program's seats in index order and every seat ranks applicants by the
    program's priority. Ordered by the students' total rank, so the first
    entry is the student-optimal assignment.
    """
    capacities = programs.capacities
    seats = [(p, s) for p in capacities for s in range(capacities[p])]
    _guard(max(len(roster), len(seats)), limit)
    seat_index = {seat: idx for idx, seat in enumerate(seats)}

    students = [s.id for s in roster.students]
    lists = [
        [seat_index[(p, s)] for p in student.preferences for s in range(capacities[p])]
        for student in roster.students
    ]
    applicants: dict[str, list[int]] = {p: [] for p in capacities}
    for i, student in enumerate(roster.students):
        for p in student.preferences:
            applicants[p].append(i)
    receiver_rank: list[dict[int, int]] = []
    for program, _ in seats:
        ordered = sorted(
            applicants[program], key=lambda i, p=program: priorities.key(p, students[i])
        )
        receiver_rank.append({i: r + 1 for r, i in enumerate(ordered)})

    found = _stable_matchings(lists, receiver_rank, len(seats))
    assignments: dict[tuple[str | None, ...], Assignment] = {}
    for m in found:
        placed = tuple(seats[j][0] if j != UNMATCHED else None for j in m)
        if placed not in assignments:
            filled = {p: sum(1 for q in placed if q == p) for p in capacities}
            assignments[placed] = Assignment(assigned=dict(zip(students, placed)), filled=filled)

    def total_rank(placed: tuple[str | None, ...]) -> int:
        return sum(
            roster.students[i].preferences.index(p) + 1
            if p is not None
            else len(roster.students[i].preferences) + 1
            for i, p in enumerate(placed)
        )

    return [assignments[key] for key in sorted(assignments, key=total_rank)]


# ---------------------------------------------------------------------------
# Balls into bins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinsOutcome:
    counts: np.ndarray

    @property
    def empty_bins(self) -> int:
        return int(np.count_nonzero(self.counts == 0))


def balls_into_bins(balls: int, bins: int, rng: np.random.Generator) -> BinsOutcome:
    """Throw ``balls`` balls into ``bins`` bins independently and uniformly."""
    if bins < 1:
        raise InvalidConfigError(f"need at least one bin, got {bins}")
    if balls < 0:
        raise InvalidConfigError(f"ball count must be non-negative, got {balls}")
    placements = rng.integers(0, bins, size=balls)
    return BinsOutcome(counts=np.bincount(placements, minlength=bins))


class ReciprocalSumReport(BaseModel):
    """Empirical mean of (1/n) * sum_j 1/(W_j + 1) against its closed form."""

    balls: int
    bins: int
    runs: int
    mean: float
    std_error: float
    reference: float = Field(..., description="(n/(T+1)) * (1 - (1 - 1/n)^(T+1))")
    bound: float = Field(..., description="n / T")


def reciprocal_sum_reference(balls: int, bins: int) -> float:
    return bins / (balls + 1) * (1 - (1 - 1 / bins) ** (balls + 1))


def reciprocal_sum_check(
    balls: int, bins: int, runs: int, rng: np.random.Generator
) -> ReciprocalSumReport:
    if balls < 1 or runs < 1:
        raise InvalidConfigError("need at least one ball and one run")
    values = np.empty(runs)
    for r in range(runs):
        counts = balls_into_bins(balls, bins, rng).counts
        values[r] = float(np.mean(1.0 / (counts + 1)))
    std_error = float(values.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return ReciprocalSumReport(
        balls=balls,
        bins=bins,
        runs=runs,
        mean=float(values.mean()),
        std_error=std_error,
        reference=reciprocal_sum_reference(balls, bins),
        bound=bins / balls,
    )


def coupon_collector_draws(bins: int, runs: int, rng: np.random.Generator) -> np.ndarray:
    """Balls thrown until every bin is non-empty, once per run.

    The wait for the (i+1)-th new bin is geometric with success probability
    (bins - i) / bins.
    """
    if bins < 1 or runs < 1:
        raise InvalidConfigError("need at least one bin and one run")
    p = (bins - np.arange(bins)) / bins
    return rng.geometric(p, size=(runs, bins)).sum(axis=1)


class DominanceCheck(BaseModel):
    """Mean unmatched women after t proposals against mean empty bins after t balls."""

    n: int
    k: int
    d: int
    t: int
    runs: int
    mean_unmatched_women: float
    mean_empty_bins: float
    pooled_se: float

    @property
    def dominated(self) -> bool:
        return self.mean_unmatched_women <= self.mean_empty_bins + 3 * self.pooled_se


def unmatched_women_vs_empty_bins(
    n: int, k: int, d: int, t: int, runs: int, rng: np.random.Generator
) -> DominanceCheck:
    """Statistical check that women untouched at time t are no more than empty bins.

    Runs that stop before t keep their final count.
    """
    if runs < 2:
        raise InvalidConfigError("dominance check needs at least two runs")
    waiting = np.empty(runs)
    empty = np.empty(runs)
    for r in range(runs):
        cfg = MarketConfig(n=n, k=k, d=d, seed=int(rng.integers(0, 2**63)))
        trace = run_mosm(generate_market(cfg)).trace
        s = int(np.searchsorted(trace.times, t, side="right")) - 1
        waiting[r] = trace.delta_w_series[s]
        empty[r] = balls_into_bins(t, n, rng).empty_bins
    pooled = math.sqrt(waiting.var(ddof=1) / runs + empty.var(ddof=1) / runs)
    return DominanceCheck(
        n=n,
        k=k,
        d=d,
        t=t,
        runs=runs,
        mean_unmatched_women=float(waiting.mean()),
        mean_empty_bins=float(empty.mean()),
        pooled_se=pooled,
    )


# ---------------------------------------------------------------------------
# Small-instance sweep
# ---------------------------------------------------------------------------


class OracleReport(BaseModel):
    """Disagreements between the engines and exhaustive enumeration."""

    instances: int
    mosm_mismatches: int = 0
    wosm_mismatches: int = 0
    blocking_pairs: int = 0
    unmatched_set_violations: int = 0
    failures: list[str] = Field(default_factory=list, description="Configs of failing instances.")

    @property
    def ok(self) -> bool:
        return not self.failures


def check_instance(market: Market) -> list[str]:
    """Problems found on one market; empty when the engines agree with enumeration."""
    problems: list[str] = []
    mosm = run_mosm(market).matching
    wosm = run_wosm(market).matching
    stable = enumerate_stable_matchings(market)
    if not stable:
        return ["no stable matching found"]
    if not is_stable(market, mosm) or not is_stable(market, wosm):
        problems.append("blocking pair")
    if mosm != stable[0]:
        problems.append("mosm")
    if wosm != stable[-1]:
        problems.append("wosm")
    men = {m.unmatched_men for m in stable}
    women = {m.unmatched_women for m in stable}
    if len(men) > 1 or len(women) > 1:
        problems.append("unmatched set")
    return problems


def random_small_config(max_n: int, max_imbalance: int, rng: np.random.Generator) -> MarketConfig:
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(max(-max_imbalance, 1 - n), max_imbalance + 1))
    d = int(rng.integers(1, n + 1))
    return MarketConfig(n=n, k=k, d=d, seed=int(rng.integers(0, 2**63)))


def check_small_instances(
    instances: int, max_n: int, seed: int, *, max_imbalance: int = 2
) -> OracleReport:
    """Compare both engines with exhaustive enumeration on random small markets."""
    if max_n + max_imbalance > get_settings().ENUMERATION_MAX_AGENTS:
        raise EnumerationLimitError(max_n + max_imbalance, get_settings().ENUMERATION_MAX_AGENTS)
    report = OracleReport(instances=instances)
    rng = make_rng(derive_seed(seed, 0))
    counters = {
        "mosm": "mosm_mismatches",
        "wosm": "wosm_mismatches",
        "blocking pair": "blocking_pairs",
        "unmatched set": "unmatched_set_violations",
    }
    for index in range(instances):
        cfg = random_small_config(max_n, max_imbalance, rng)
        problems = check_instance(generate_market(cfg))
        for problem in problems:
            field_name = counters.get(problem)
            if field_name is not None:
                setattr(report, field_name, getattr(report, field_name) + 1)
        if problems:
            report.failures.append(
                f"#{index} n={cfg.n} k={cfg.k} d={cfg.d} seed={cfg.seed}: {', '.join(problems)}"
            )
    logger.info(
        "Checked %d small instances against enumeration: %d failing",
        instances,
        len(report.failures),
    )
    return report

