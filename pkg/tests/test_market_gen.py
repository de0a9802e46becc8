"""Tests for random market generation."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import InvalidConfigError, InvalidInputError
from app.models.market import MarketConfig
from app.services.market_gen import (
    generate_market,
    market_from_lists,
    sample_d_subset,
    sample_preference_lists,
)

pytestmark = pytest.mark.service


class TestSampleDSubset:
    def test_full_permutation(self, rng: np.random.Generator) -> None:
        sample = sample_d_subset(10, 10, rng)
        assert sorted(sample.tolist()) == list(range(10))

    def test_distinct_and_in_range(self, rng: np.random.Generator) -> None:
        for _ in range(50):
            sample = sample_d_subset(1000, 7, rng).tolist()
            assert len(set(sample)) == 7
            assert all(0 <= j < 1000 for j in sample)

    def test_single_item(self, rng: np.random.Generator) -> None:
        assert sample_d_subset(1, 1, rng).tolist() == [0]

    @pytest.mark.parametrize("n,d", [(5, 0), (5, 6)])
    def test_rejects_invalid_size(self, rng: np.random.Generator, n: int, d: int) -> None:
        with pytest.raises(InvalidConfigError):
            sample_d_subset(n, d, rng)

    def test_first_entry_is_uniform(self, rng: np.random.Generator) -> None:
        draws = 20_000
        counts = np.bincount([sample_d_subset(10, 3, rng)[0] for _ in range(draws)], minlength=10)
        expected = draws / 10
        sigma = np.sqrt(draws * 0.1 * 0.9)
        assert np.all(np.abs(counts - expected) < 4 * sigma)


class TestSamplePreferenceLists:
    @pytest.mark.parametrize("n,d", [(100, 5), (100, 50), (100, 80), (7, 7)])
    def test_rows_are_distinct_samples(self, rng: np.random.Generator, n: int, d: int) -> None:
        lists = sample_preference_lists(40, n, d, rng)
        assert lists.shape == (40, d)
        for row in lists.tolist():
            assert len(set(row)) == d
            assert min(row) >= 0 and max(row) < n

    def test_no_men(self, rng: np.random.Generator) -> None:
        assert sample_preference_lists(0, 10, 3, rng).shape == (0, 3)

    @pytest.mark.parametrize("d", [3, 9])
    def test_entries_are_uniform_over_women(self, rng: np.random.Generator, d: int) -> None:
        lists = sample_preference_lists(4000, 12, d, rng)
        counts = np.bincount(lists[:, 0], minlength=12)
        expected = 4000 / 12
        sigma = np.sqrt(4000 * (1 / 12) * (11 / 12))
        assert np.all(np.abs(counts - expected) < 4 * sigma)


class TestGenerateMarket:
    def test_same_seed_same_market(self) -> None:
        cfg = MarketConfig(n=200, k=-3, d=12, seed=99)
        assert generate_market(cfg).same_as(generate_market(cfg))

    def test_different_seed_different_market(self) -> None:
        a = generate_market(MarketConfig(n=200, k=0, d=12, seed=1))
        b = generate_market(MarketConfig(n=200, k=0, d=12, seed=2))
        assert not a.same_as(b)

    @pytest.mark.parametrize(
        "n,k,d", [(1, 0, 1), (30, -5, 4), (30, 5, 30), (50, 0, 20), (3, -3, 2)]
    )
    def test_structure_is_consistent(self, n: int, k: int, d: int) -> None:
        market = generate_market(MarketConfig(n=n, k=k, d=d, seed=5))
        market.validate()
        assert market.n_men == n + k
        assert market.n_women == n
        assert int(market.degrees.sum()) == (n + k) * d

    def test_priority_matches_women_lists(self) -> None:
        market = generate_market(MarketConfig(n=40, k=2, d=6, seed=11))
        for i, row in enumerate(market.men_prefs.tolist()):
            for r, j in enumerate(row):
                assert market.woman_rank(j, i) == market.priority[i, r]
                assert market.man_rank(i, j) == r + 1

    def test_complete_market_lists_everyone(self) -> None:
        market = generate_market(MarketConfig(n=6, k=0, d=6, seed=3))
        assert market.degrees.tolist() == [6] * 6

    @pytest.mark.parametrize(
        "fields", [{"n": 5, "d": 6}, {"n": 5, "d": 0}, {"n": 5, "k": -6, "d": 1}, {"n": 0, "d": 1}]
    )
    def test_config_rejects_invalid_cells(self, fields: dict[str, int]) -> None:
        with pytest.raises(ValidationError):
            MarketConfig(**fields)


class TestMarketFromLists:
    def test_builds_ranks(self, cyclic_market) -> None:
        assert cyclic_market.man_rank(1, 0) == 2
        assert cyclic_market.woman_rank(0, 1) == 1
        assert cyclic_market.woman_rank(0, 0) == 2

    def test_not_adjacent_is_none(self, two_men_one_woman) -> None:
        market = market_from_lists([[0], [1]], [[0], [1]])
        assert market.man_rank(0, 1) is None
        assert two_men_one_woman.man_rank(0, 0) == 1

    def test_rejects_woman_listing_stranger(self) -> None:
        with pytest.raises(InvalidInputError):
            market_from_lists([[0], [0]], [[0]])

    def test_rejects_unequal_lengths(self) -> None:
        with pytest.raises(InvalidInputError):
            market_from_lists([[0, 1], [1]], [[0, 1], [1, 0]])

    def test_rejects_unknown_woman(self) -> None:
        with pytest.raises(InvalidInputError):
            market_from_lists([[2]], [[0]])
