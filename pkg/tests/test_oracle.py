"""Tests for brute-force enumeration, blocking pairs and balls-into-bins checks."""

from __future__ import annotations

import math

import numpy as np
import pytest

from app.exceptions import EnumerationLimitError, InvalidConfigError
from app.models.market import Market, MarketConfig
from app.models.matching import UNMATCHED, Matching
from app.services.da_core import run_mosm, run_wosm
from app.services.market_gen import generate_market, market_from_lists
from app.services.oracle import (
    balls_into_bins,
    check_instance,
    check_small_instances,
    coupon_collector_draws,
    enumerate_stable_matchings,
    find_blocking_pair,
    is_stable,
    reciprocal_sum_check,
    reciprocal_sum_reference,
    unmatched_women_vs_empty_bins,
)
from app.services.theory import coupon_collector_tail

pytestmark = pytest.mark.service


def _naive_is_stable(market: Market, matching: Matching) -> bool:
    """Every man against every woman he lists."""
    for i in range(market.n_men):
        wife = int(matching.man_to_woman[i])
        for j in market.men_prefs[i].tolist():
            mine = market.man_rank(i, j)
            current = market.man_rank(i, wife) if wife != UNMATCHED else None
            if current is not None and mine >= current:
                continue
            husband = int(matching.woman_to_man[j])
            held = market.woman_rank(j, husband) if husband != UNMATCHED else None
            if held is None or market.woman_rank(j, i) < held:
                return False
    return True


def _random_matching(market: Market, rng: np.random.Generator) -> Matching:
    taken: set[int] = set()
    man_side = [UNMATCHED] * market.n_men
    for i in rng.permutation(market.n_men).tolist():
        free = [j for j in market.men_prefs[i].tolist() if j not in taken]
        if free and rng.random() < 0.8:
            j = free[int(rng.integers(0, len(free)))]
            man_side[i] = j
            taken.add(j)
    return Matching.from_man_side(man_side, market.n_women)


class TestBlockingPairs:
    def test_engines_are_stable(self, cyclic_market: Market) -> None:
        assert is_stable(cyclic_market, run_mosm(cyclic_market).matching)
        assert is_stable(cyclic_market, run_wosm(cyclic_market).matching)

    def test_single_man_blocks_with_single_woman(self, cyclic_market: Market) -> None:
        matching = Matching.from_man_side([UNMATCHED, 1], 2)
        assert find_blocking_pair(cyclic_market, matching) == (0, 0)

    def test_preferred_man_left_out(self, two_men_one_woman: Market) -> None:
        matching = Matching.from_man_side([0, UNMATCHED], 1)
        assert find_blocking_pair(two_men_one_woman, matching) == (1, 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_naive_check(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        market = generate_market(MarketConfig(n=6, k=int(rng.integers(-2, 3)), d=3, seed=seed))
        for _ in range(40):
            matching = _random_matching(market, rng)
            assert is_stable(market, matching) == _naive_is_stable(market, matching)


class TestEnumeration:
    def test_single_stable_matching(self, first_choice_market: Market) -> None:
        stable = enumerate_stable_matchings(first_choice_market)
        assert [m.man_to_woman.tolist() for m in stable] == [[0, 1]]

    def test_poles_of_cyclic_market(self, cyclic_market: Market) -> None:
        stable = enumerate_stable_matchings(cyclic_market)
        assert [m.man_to_woman.tolist() for m in stable] == [[0, 1], [1, 0]]

    def test_every_enumerated_matching_is_stable(self) -> None:
        market = market_from_lists(
            [[0, 1, 2], [1, 2, 0], [2, 0, 1]],
            [[1, 2, 0], [2, 0, 1], [0, 1, 2]],
        )
        stable = enumerate_stable_matchings(market)
        assert len(stable) == 3
        assert all(_naive_is_stable(market, m) for m in stable)
        assert stable[0] == run_mosm(market).matching
        assert stable[-1] == run_wosm(market).matching

    def test_refuses_large_instances(self, cyclic_market: Market) -> None:
        with pytest.raises(EnumerationLimitError):
            enumerate_stable_matchings(cyclic_market, limit=1)
        with pytest.raises(EnumerationLimitError):
            enumerate_stable_matchings(generate_market(MarketConfig(n=11, k=0, d=2, seed=0)))


class TestSmallInstances:
    def test_random_instances(self) -> None:
        report = check_small_instances(150, 5, seed=3)
        assert report.instances == 150
        assert report.ok, report.failures
        assert report.mosm_mismatches == report.wosm_mismatches == 0

    def test_check_instance_on_hand_market(self, cyclic_market: Market) -> None:
        assert check_instance(cyclic_market) == []

    def test_refuses_oversized_sweep(self) -> None:
        with pytest.raises(EnumerationLimitError):
            check_small_instances(1, 9, seed=0, max_imbalance=2)

    @pytest.mark.slow
    def test_five_hundred_instances(self) -> None:
        report = check_small_instances(500, 5, seed=11)
        assert report.ok, report.failures


class TestBallsIntoBins:
    def test_counts_sum_to_balls(self, rng: np.random.Generator) -> None:
        outcome = balls_into_bins(40, 10, rng)
        assert int(outcome.counts.sum()) == 40
        assert outcome.counts.size == 10

    def test_no_balls_leaves_every_bin_empty(self, rng: np.random.Generator) -> None:
        assert balls_into_bins(0, 7, rng).empty_bins == 7

    def test_rejects_zero_bins(self, rng: np.random.Generator) -> None:
        with pytest.raises(InvalidConfigError):
            balls_into_bins(3, 0, rng)

    def test_empty_fraction_mean(self, rng: np.random.Generator) -> None:
        runs = 10_000
        fractions = np.array([balls_into_bins(100, 100, rng).empty_bins / 100 for _ in range(runs)])
        sigma = fractions.std(ddof=1) / math.sqrt(runs)
        assert abs(fractions.mean() - 0.99**100) <= 3 * sigma

    def test_reciprocal_sum(self, rng: np.random.Generator) -> None:
        report = reciprocal_sum_check(100, 100, 10_000, rng)
        assert report.reference == pytest.approx(0.6369, abs=1e-4)
        assert abs(report.mean - report.reference) <= 3 * report.std_error
        assert report.mean <= report.bound

    def test_reciprocal_reference_closed_form(self) -> None:
        assert reciprocal_sum_reference(100, 100) == pytest.approx(
            (100 / 101) * (1 - 0.99**101)
        )

    def test_coupon_collector_tail(self, rng: np.random.Generator) -> None:
        runs = 10_000
        draws = coupon_collector_draws(100, runs, rng)
        frequency = float(np.mean(draws >= 2 * 100 * math.log(100)))
        bound = coupon_collector_tail(100, 2.0)
        assert frequency <= bound + 3 * math.sqrt(bound * (1 - bound) / runs)
        assert draws.min() >= 100

    def test_unmatched_women_dominated_by_empty_bins(self, rng: np.random.Generator) -> None:
        check = unmatched_women_vs_empty_bins(60, 0, 5, 40, 200, rng)
        assert check.dominated
        with pytest.raises(InvalidConfigError):
            unmatched_women_vs_empty_bins(60, 0, 5, 40, 1, rng)
