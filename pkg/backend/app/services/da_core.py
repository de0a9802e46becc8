"""Deferred acceptance on a materialized market.

Both poles of the stable-matching lattice are computed with the sequential
(McVitie–Wilson) form of deferred acceptance: proposers enter one at a time in
ascending index order and every rejection chain runs to completion before the
next proposer enters. Time ticks once per proposal.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from app.exceptions import InvalidInputError
from app.models.market import Market
from app.models.matching import UNMATCHED, AgentRanks, DAResult, Matching, RunTrace

logger = logging.getLogger(__name__)


@dataclass
class _Run:
    """Raw output of one run of the proposal loop, in proposer/receiver terms."""

    holder: list[int]
    held_rank: list[int]
    proposals_made: list[int]
    proposals_received: list[int]
    tau: int
    times: list[int]
    exhausted: list[int]
    untouched: list[int]
    acceptance_prob: list[float] | None = field(default=None)


def _check_order(order: Sequence[int], size: int) -> list[int]:
    entries = [int(i) for i in order]
    if sorted(entries) != list(range(size)):
        raise InvalidInputError(f"entry order is not a permutation of 0..{size - 1}: {entries}")
    return entries


def _propose(
    prefs: list[list[int]],
    slot_rank: list[list[int]],
    n_receivers: int,
    order: list[int],
    decimation: int,
    record_acceptance_prob: bool,
) -> _Run:
    """Run sequential deferred acceptance.

    ``prefs[i]`` is proposer i's ranked list and ``slot_rank[i][r]`` is the rank
    the receiver ``prefs[i][r]`` gives proposer i. Receivers hold the best
    proposal seen so far.
    """
    n_proposers = len(prefs)
    holder = [UNMATCHED] * n_receivers
    held_rank = [0] * n_receivers
    made = [0] * n_proposers
    received = [0] * n_receivers

    t = 0
    exhausted = 0
    untouched = n_receivers
    times = [0]
    ex_series = [0]
    un_series = [n_receivers]

    p_series: list[float] | None = [] if record_acceptance_prob else None
    inv_weight = np.ones(n_receivers) if record_acceptance_prob else None
    last_p = 0.0

    for start in order:
        i = start
        while True:
            slot = made[i]
            row = prefs[i]
            if slot == len(row):
                exhausted += 1
                if times[-1] == t:
                    ex_series[-1] = exhausted
                break

            j = row[slot]
            if inv_weight is not None:
                remaining = n_receivers - slot
                seen = inv_weight[row[:slot]].sum() if slot else 0.0
                last_p = float((inv_weight.sum() - seen) / remaining)
            made[i] = slot + 1
            t += 1
            received[j] += 1
            if inv_weight is not None:
                inv_weight[j] = 1.0 / (received[j] + 1)

            rank = slot_rank[i][slot]
            current = holder[j]
            rejected = UNMATCHED
            if current == UNMATCHED:
                holder[j] = i
                held_rank[j] = rank
                untouched -= 1
            elif rank < held_rank[j]:
                holder[j] = i
                held_rank[j] = rank
                rejected = current
            else:
                rejected = i

            if t % decimation == 0:
                times.append(t)
                ex_series.append(exhausted)
                un_series.append(untouched)
                if p_series is not None:
                    p_series.append(last_p)

            if rejected == UNMATCHED:
                break
            i = rejected

    if times[-1] != t:
        times.append(t)
        ex_series.append(exhausted)
        un_series.append(untouched)
        if p_series is not None:
            p_series.append(last_p)

    return _Run(
        holder=holder,
        held_rank=held_rank,
        proposals_made=made,
        proposals_received=received,
        tau=t,
        times=times,
        exhausted=ex_series,
        untouched=un_series,
        acceptance_prob=p_series,
    )


def _as_array(values: list[int]) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


def _trace(
    run: _Run,
    delta_m: list[int],
    delta_w: list[int],
    w_counts: list[int],
    m_counts: list[int],
    decimation: int,
) -> RunTrace:
    return RunTrace(
        tau=run.tau,
        times=_as_array(run.times),
        delta_m_series=_as_array(delta_m),
        delta_w_series=_as_array(delta_w),
        w_counts=_as_array(w_counts),
        m_counts=_as_array(m_counts),
        decimation=decimation,
        acceptance_prob_series=(
            np.asarray(run.acceptance_prob) if run.acceptance_prob is not None else None
        ),
    )


def run_mosm(
    market: Market,
    *,
    order: Sequence[int] | None = None,
    decimation: int = 1,
    record_acceptance_prob: bool = False,
) -> DAResult:
    """Man-proposing deferred acceptance; returns the man-optimal stable matching.

    Args:
        market: The preference structure.
        order: Entry order of the men (default ascending index).
        decimation: Record trace samples every ``decimation`` proposals.
        record_acceptance_prob: Also record the ex-ante acceptance probability
            of each proposal (average of 1/(received+1) over the women the
            proposer has not yet approached).
    """
    if decimation < 1:
        raise InvalidInputError("decimation must be at least 1")
    n_men, n_women, d = market.n_men, market.n_women, market.d
    entries = list(range(n_men)) if order is None else _check_order(order, n_men)

    run = _propose(
        market.men_prefs.tolist(),
        market.priority.tolist(),
        n_women,
        entries,
        decimation,
        record_acceptance_prob,
    )

    husbands = _as_array(run.holder)
    wives = np.full(n_men, UNMATCHED, dtype=np.int64)
    matched = husbands != UNMATCHED
    wives[husbands[matched]] = np.flatnonzero(matched)

    made = _as_array(run.proposals_made)
    men_ranks = np.where(wives == UNMATCHED, d + 1, made)
    women_ranks = np.where(matched, _as_array(run.held_rank), market.degrees + 1)

    trace = _trace(
        run,
        delta_m=run.exhausted,
        delta_w=run.untouched,
        w_counts=run.proposals_received,
        m_counts=run.proposals_made,
        decimation=decimation,
    )
    logger.debug(
        "MOSM: tau=%d delta_m=%d delta_w=%d", trace.tau, trace.final_delta_m, trace.final_delta_w
    )
    return DAResult(
        matching=Matching(man_to_woman=wives, woman_to_man=husbands),
        trace=trace,
        ranks=AgentRanks(men=men_ranks, women=women_ranks),
    )


def run_wosm(
    market: Market,
    *,
    order: Sequence[int] | None = None,
    decimation: int = 1,
) -> DAResult:
    """Woman-proposing deferred acceptance; returns the woman-optimal stable matching.

    The trace keeps its men/women meaning: ``delta_m_series`` counts men not
    yet proposed to (non-increasing) and ``delta_w_series`` counts women who
    exhausted their lists (non-decreasing). ``w_counts`` are proposals made by
    each woman, ``m_counts`` proposals received by each man.
    """
    if decimation < 1:
        raise InvalidInputError("decimation must be at least 1")
    n_men, n_women, d = market.n_men, market.n_women, market.d
    entries = list(range(n_women)) if order is None else _check_order(order, n_women)

    cuts = market.women_ptr[1:-1]
    women_lists = [part.tolist() for part in np.split(market.women_men, cuts)]
    women_slot_rank = [part.tolist() for part in np.split(market.women_men_rank, cuts)]
    if n_women == 0:
        women_lists, women_slot_rank = [], []

    run = _propose(women_lists, women_slot_rank, n_men, entries, decimation, False)

    wives = _as_array(run.holder)
    husbands = np.full(n_women, UNMATCHED, dtype=np.int64)
    matched = wives != UNMATCHED
    husbands[wives[matched]] = np.flatnonzero(matched)

    made = _as_array(run.proposals_made)
    women_ranks = np.where(husbands == UNMATCHED, market.degrees + 1, made)
    men_ranks = np.where(matched, _as_array(run.held_rank), d + 1)

    trace = _trace(
        run,
        delta_m=run.untouched,
        delta_w=run.exhausted,
        w_counts=run.proposals_made,
        m_counts=run.proposals_received,
        decimation=decimation,
    )
    return DAResult(
        matching=Matching(man_to_woman=wives, woman_to_man=husbands),
        trace=trace,
        ranks=AgentRanks(men=men_ranks, women=women_ranks),
    )


def verify_order_independence(market: Market, orders: Sequence[Sequence[int]]) -> bool:
    """True iff every entry order of the men yields the same matching."""
    checked = [_check_order(order, market.n_men) for order in orders]
    if not checked:
        return True
    baseline = run_mosm(market, order=checked[0]).matching
    return all(run_mosm(market, order=order).matching == baseline for order in checked[1:])
