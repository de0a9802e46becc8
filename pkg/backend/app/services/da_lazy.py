"""Coin-flipping man-proposing deferred acceptance.

Preferences are revealed only when the algorithm reads them: a man's next
choice is a uniform draw among the women he has not yet approached, and a
woman who has already received nu proposals prefers the newcomer to her
current partner with probability 1/(nu+1). The outcome has the same law as
running ``run_mosm`` on a freshly generated market, without ever building the
preference lists.
"""

from __future__ import annotations

import logging

import numpy as np

from app.exceptions import InvalidInputError
from app.models.market import MarketConfig
from app.models.matching import UNMATCHED, AgentRanks, DAResult, Matching, RunTrace
from app.services.seeding import make_rng

logger = logging.getLogger(__name__)


class _Uniforms:
    """Uniform [0, 1) variates drawn from a generator in blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 4096) -> None:
        self._rng = rng
        self._block = block
        self._buffer: list[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buffer):
            self._buffer = self._rng.random(self._block).tolist()
            self._pos = 0
        u = self._buffer[self._pos]
        self._pos += 1
        return u


def sample_woman_rank(received: int, degree: int, rng: np.random.Generator) -> int:
    """Rank a woman gives her husband after ``received`` of her ``degree``
    neighbors proposed.

    Her best proposer sits at the maximum V of ``received`` uniforms; each of
    the ``degree - received`` silent neighbors outranks him independently with
    probability 1 - V.
    """
    if received < 1 or received > degree:
        raise InvalidInputError(
            f"need 1 <= received <= degree, got received={received}, degree={degree}"
        )
    best = rng.random() ** (1.0 / received)
    return 1 + int(rng.binomial(degree - received, 1.0 - best))


def sample_woman_ranks(
    received: np.ndarray, degree: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized ``sample_woman_rank`` over women with at least one proposal."""
    received = np.asarray(received, dtype=np.int64)
    degree = np.asarray(degree, dtype=np.int64)
    if np.any(received < 1) or np.any(received > degree):
        raise InvalidInputError("need 1 <= received <= degree for every woman")
    best = rng.random(received.size) ** (1.0 / received)
    return 1 + rng.binomial(degree - received, 1.0 - best)


def _draw_outside(n: int, taken: set[int], uniforms: _Uniforms) -> int:
    while True:
        j = int(uniforms.next() * n)
        if j not in taken:
            return j


def run_mosm_lazy(
    cfg: MarketConfig,
    rng: np.random.Generator | None = None,
    *,
    decimation: int = 1,
) -> DAResult:
    """Man-proposing DA under the principle of deferred decisions."""
    if decimation < 1:
        raise InvalidInputError("decimation must be at least 1")
    if rng is None:
        rng = make_rng(cfg.seed)
    n, d, n_men = cfg.n, cfg.d, cfg.n_men
    uniforms = _Uniforms(rng)

    approached: list[set[int]] = [set() for _ in range(n_men)]
    made = [0] * n_men
    received = [0] * n
    holder = [UNMATCHED] * n

    t = 0
    exhausted = 0
    untouched = n
    times = [0]
    dm_series = [0]
    dw_series = [n]

    for start in range(n_men):
        i = start
        while True:
            if made[i] == d:
                exhausted += 1
                if times[-1] == t:
                    dm_series[-1] = exhausted
                break
            j = _draw_outside(n, approached[i], uniforms)
            approached[i].add(j)
            made[i] += 1
            t += 1
            before = received[j]
            received[j] = before + 1

            current = holder[j]
            rejected = UNMATCHED
            if current == UNMATCHED:
                holder[j] = i
                untouched -= 1
            elif uniforms.next() * (before + 1) < 1.0:
                holder[j] = i
                rejected = current
            else:
                rejected = i

            if t % decimation == 0:
                times.append(t)
                dm_series.append(exhausted)
                dw_series.append(untouched)
            if rejected == UNMATCHED:
                break
            i = rejected

    if times[-1] != t:
        times.append(t)
        dm_series.append(exhausted)
        dw_series.append(untouched)

    # Reveal the rest of every list only to learn each woman's degree.
    silent = np.zeros(n, dtype=np.int64)
    for i in range(n_men):
        taken = set(approached[i])
        for _ in range(d - made[i]):
            j = _draw_outside(n, taken, uniforms)
            taken.add(j)
            silent[j] += 1

    husbands = np.asarray(holder, dtype=np.int64)
    matched = husbands != UNMATCHED
    wives = np.full(n_men, UNMATCHED, dtype=np.int64)
    wives[husbands[matched]] = np.flatnonzero(matched)

    received_arr = np.asarray(received, dtype=np.int64)
    degrees = received_arr + silent
    women_ranks = degrees + 1
    women_ranks[matched] = sample_woman_ranks(received_arr[matched], degrees[matched], rng)
    made_arr = np.asarray(made, dtype=np.int64)
    men_ranks = np.where(wives == UNMATCHED, d + 1, made_arr)

    trace = RunTrace(
        tau=t,
        times=np.asarray(times, dtype=np.int64),
        delta_m_series=np.asarray(dm_series, dtype=np.int64),
        delta_w_series=np.asarray(dw_series, dtype=np.int64),
        w_counts=received_arr,
        m_counts=made_arr,
        decimation=decimation,
    )
    logger.debug(
        "Lazy MOSM: tau=%d delta_m=%d delta_w=%d", t, trace.final_delta_m, trace.final_delta_w
    )
    return DAResult(
        matching=Matching(man_to_woman=wives, woman_to_man=husbands),
        trace=trace,
        ranks=AgentRanks(men=men_ranks, women=women_ranks),
    )
