"""Rank statistics, connectivity and hop-distance measures."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from app.exceptions import InvalidInputError
from app.models.market import Market
from app.models.matching import UNMATCHED, DAResult, Matching
from app.models.stats import RankGap, RankSummary

logger = logging.getLogger(__name__)


def _mean(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else float("nan")


def summarize(market: Market, matching: Matching) -> RankSummary:
    """Exact average ranks and unmatched counts of ``matching`` in ``market``."""
    if (
        matching.man_to_woman.shape != (market.n_men,)
        or matching.woman_to_man.shape != (market.n_women,)
        or not matching.is_consistent()
    ):
        raise InvalidInputError("matching does not describe a partial bijection of this market")

    men_ranks = np.full(market.n_men, market.d + 1, dtype=np.int64)
    women_ranks = market.degrees + 1
    for i, j in matching.pairs():
        man_rank = market.man_rank(i, j)
        woman_rank = market.woman_rank(j, i)
        if man_rank is None or woman_rank is None:
            raise InvalidInputError(f"man {i} and woman {j} are matched but not adjacent")
        men_ranks[i] = man_rank
        women_ranks[j] = woman_rank

    return RankSummary(
        r_men=_mean(men_ranks),
        r_women=_mean(women_ranks),
        delta_m=int(np.count_nonzero(matching.man_to_woman == UNMATCHED)),
        delta_w=int(np.count_nonzero(matching.woman_to_man == UNMATCHED)),
    )


def summarize_result(result: DAResult) -> RankSummary:
    """Summary from the per-agent ranks an engine recorded (eager or lazy)."""
    return RankSummary(
        r_men=_mean(result.ranks.men),
        r_women=_mean(result.ranks.women),
        delta_m=int(np.count_nonzero(result.matching.man_to_woman == UNMATCHED)),
        delta_w=int(np.count_nonzero(result.matching.woman_to_man == UNMATCHED)),
    )


def rank_gap(mosm: RankSummary, wosm: RankSummary) -> RankGap:
    return RankGap(men=wosm.r_men - mosm.r_men, women=mosm.r_women - wosm.r_women)


def count_components(market: Market) -> int:
    """Connected components of the bipartite graph; isolated women count once each."""
    n_men, n_women = market.n_men, market.n_women
    size = n_men + n_women
    if size == 0:
        return 0
    rows = np.repeat(np.arange(n_men, dtype=np.int64), market.d)
    cols = market.men_prefs.ravel() + n_men
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(size, size))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def _bipartite_graph(lists: Sequence[Sequence[int]], n_items: int) -> coo_matrix:
    n_agents = len(lists)
    lengths = np.fromiter((len(row) for row in lists), dtype=np.int64, count=n_agents)
    rows = np.repeat(np.arange(n_agents, dtype=np.int64), lengths)
    cols = np.fromiter((item for row in lists for item in row), dtype=np.int64) + n_agents
    size = n_agents + n_items
    return coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(size, size))


def hop_fractions_from_lists(
    lists: Sequence[Sequence[int]],
    n_items: int,
    sample: int,
    max_hops: int,
    rng: np.random.Generator,
    batch: int = 64,
) -> list[float]:
    """Cumulative fraction of (source, other agent) pairs within h hops.

    Two agents are one hop apart when their lists share an item. Sources are
    ``sample`` agents drawn without replacement; targets are all other agents.
    Distances come from breadth-first search on the agent-item graph (one
    agent hop is two edges), so the quadratic agent-agent adjacency is never
    built. Sources are processed in batches to bound memory.
    """
    n_agents = len(lists)
    if max_hops < 1:
        raise InvalidInputError("max_hops must be at least 1")
    if sample < 0 or sample > n_agents:
        raise InvalidInputError(f"cannot sample {sample} sources out of {n_agents} agents")
    if n_agents < 2 or sample == 0:
        return [0.0] * max_hops

    graph = _bipartite_graph(lists, n_items).tocsr()
    sources = rng.choice(n_agents, size=sample, replace=False)
    within = np.zeros(max_hops, dtype=np.int64)
    for start in range(0, sample, batch):
        chunk = sources[start : start + batch]
        dist = shortest_path(graph, directed=False, unweighted=True, indices=chunk)
        agent_hops = dist[:, :n_agents] / 2.0
        for h in range(1, max_hops + 1):
            within[h - 1] += int(np.count_nonzero(agent_hops <= h)) - chunk.size

    pairs = sample * (n_agents - 1)
    return [float(count) / pairs for count in within]


def hop_fractions(
    market: Market, sample: int, max_hops: int, rng: np.random.Generator
) -> list[float]:
    """Man-to-man hop statistics; two men are adjacent when they list a common woman."""
    return hop_fractions_from_lists(
        market.men_prefs.tolist(), market.n_women, sample, max_hops, rng
    )
