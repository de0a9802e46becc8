"""Seeded generation of random partially connected markets.

Each of the n+k men draws a uniformly random ordered list of d distinct women;
each woman ranks the men who listed her in uniformly random order. Given the
same configuration and seed the generated arrays are bit-identical.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from app.exceptions import InvalidConfigError, InvalidInputError
from app.models.market import Market, MarketConfig
from app.services.seeding import make_rng

logger = logging.getLogger(__name__)


def sample_d_subset(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ordered sample of ``d`` distinct indices from ``range(n)``.

    Partial Fisher–Yates over a virtual array: only swapped positions are
    stored, so the cost is O(d) regardless of n.
    """
    if d < 1 or d > n:
        raise InvalidConfigError(f"cannot sample d={d} distinct items out of n={n}")
    swapped: dict[int, int] = {}
    out = np.empty(d, dtype=np.int64)
    picks = rng.integers(np.arange(d), n)
    for i, r in enumerate(picks.tolist()):
        at_i = swapped.get(i, i)
        out[i] = swapped.get(r, r)
        swapped[r] = at_i
    return out


def _expected_draws(n: int, d: int) -> float:
    # draws with replacement needed to see d distinct values
    return sum(n / (n - i) for i in range(d))


def sample_preference_lists(n_men: int, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Ordered d-samples for ``n_men`` men at once, as an ``(n_men, d)`` array.

    Sparse lists (2d <= n) keep the first d distinct values of a row of
    uniform draws, redrawing the rare rows that come up short. Dense lists run
    a partial Fisher–Yates on all rows in lockstep.
    """
    if d < 1 or d > n:
        raise InvalidConfigError(f"cannot sample d={d} distinct items out of n={n}")
    if n_men == 0:
        return np.empty((0, d), dtype=np.int64)

    if 2 * d > n:
        table = np.tile(np.arange(n, dtype=np.int64), (n_men, 1))
        rows = np.arange(n_men)
        for i in range(d):
            r = rng.integers(i, n, size=n_men)
            head = table[rows, i].copy()
            table[rows, i] = table[rows, r]
            table[rows, r] = head
        return table[:, :d].copy()

    width = int(math.ceil(1.25 * _expected_draws(n, d))) + 8
    out = np.empty((n_men, d), dtype=np.int64)
    pending = np.arange(n_men)
    while pending.size:
        draws = rng.integers(0, n, size=(pending.size, width))
        order = np.argsort(draws, axis=1, kind="stable")
        ordered = np.take_along_axis(draws, order, axis=1)
        first_sorted = np.ones(ordered.shape, dtype=bool)
        first_sorted[:, 1:] = ordered[:, 1:] != ordered[:, :-1]
        first = np.empty_like(first_sorted)
        np.put_along_axis(first, order, first_sorted, axis=1)
        seen = np.cumsum(first, axis=1)
        complete = seen[:, -1] >= d
        keep = first & (seen <= d)
        out[pending[complete]] = draws[complete][keep[complete]].reshape(-1, d)
        pending = pending[~complete]
    return out


def _assemble(n_women: int, men_prefs: np.ndarray, keys: np.ndarray) -> Market:
    """Build the women's side from men's lists and per-edge priority keys.

    Woman j ranks the men who listed her by ascending key.
    """
    n_men, d = men_prefs.shape
    woman = men_prefs.ravel()
    man = np.repeat(np.arange(n_men, dtype=np.int64), d)
    slot = np.tile(np.arange(d, dtype=np.int64), n_men)

    order = np.lexsort((keys, woman))
    ptr = np.zeros(n_women + 1, dtype=np.int64)
    ptr[1:] = np.cumsum(np.bincount(woman, minlength=n_women))

    position = np.arange(woman.size, dtype=np.int64) - ptr[woman[order]]
    priority = np.empty(woman.size, dtype=np.int64)
    priority[order] = position + 1

    return Market(
        n_women=n_women,
        men_prefs=men_prefs,
        priority=priority.reshape(n_men, d),
        women_ptr=ptr,
        women_men=man[order],
        women_men_rank=slot[order] + 1,
    )


def generate_market(cfg: MarketConfig, rng: np.random.Generator | None = None) -> Market:
    """Draw a random market for ``cfg``; uses ``cfg.seed`` when no stream is given."""
    if rng is None:
        rng = make_rng(cfg.seed)
    men_prefs = sample_preference_lists(cfg.n_men, cfg.n, cfg.d, rng)
    keys = rng.random(men_prefs.size)
    market = _assemble(cfg.n, men_prefs, keys)
    logger.debug("Generated market n=%d k=%d d=%d seed=%d", cfg.n, cfg.k, cfg.d, cfg.seed)
    return market


def market_from_lists(
    men_prefs: Sequence[Sequence[int]],
    women_prefs: Sequence[Sequence[int]],
) -> Market:
    """Build a validated market from explicit preference lists.

    Every man's list must have the same positive length; woman j's list must
    contain exactly the men who listed her.
    """
    lengths = {len(row) for row in men_prefs}
    if len(lengths) > 1 or 0 in lengths:
        raise InvalidInputError("every man must list the same positive number of women")
    d = lengths.pop() if lengths else 1
    n_women = len(women_prefs)

    men = np.asarray(men_prefs, dtype=np.int64).reshape(len(men_prefs), d)
    ptr = np.zeros(n_women + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(row) for row in women_prefs])
    women_men = np.asarray([i for row in women_prefs for i in row], dtype=np.int64)

    woman_rank = [{i: r + 1 for r, i in enumerate(row)} for row in women_prefs]
    man_rank = [{j: r + 1 for r, j in enumerate(row)} for row in men_prefs]
    try:
        if any(j < 0 or j >= n_women for row in men_prefs for j in row):
            raise KeyError("woman index")
        priority = np.asarray(
            [[woman_rank[j][i] for j in row] for i, row in enumerate(men_prefs)],
            dtype=np.int64,
        ).reshape(men.shape)
        women_men_rank = np.asarray(
            [man_rank[i][j] for j, row in enumerate(women_prefs) for i in row],
            dtype=np.int64,
        )
    except (KeyError, IndexError) as exc:
        raise InvalidInputError(f"men's and women's lists disagree ({exc})") from exc

    market = Market(
        n_women=n_women,
        men_prefs=men,
        priority=priority,
        women_ptr=ptr,
        women_men=women_men,
        women_men_rank=women_men_rank,
    )
    market.validate()
    return market
