"""Tests for priority-strategy generation and search."""

import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.analytic import relay_interruption_matrix
from relay_reliability.errors import NoFeasibleStrategyError, SearchBudgetError
from relay_reliability.markov import PriorityStrategy, all_strategies
from relay_reliability.strategy import (
    density_inspired,
    dynamic_priority,
    penultimate_adjust,
    remaining_route_interruption,
    single_hop_inspired,
    stationary_optimal,
    strategy_reports,
    weighted_interruption_of,
)

from .case_study import CASE_P_I, CASE_P_S, CASE_WEIGHTED, case_constraints, case_tiers


def _case_p_i():
    return relay_interruption_matrix(case_tiers(), case_constraints())


def _brute_force_best(p_i):
    scored = [(weighted_interruption_of(s, p_i)[0], s.ranks) for s in all_strategies(p_i.shape[0])]
    best = min(value for value, _ in scored)
    return best, min(ranks for value, ranks in scored if value == best)


class TestStationaryOptimal:
    def test_case_study(self):
        assert stationary_optimal(_case_p_i()).ranks == (3, 2, 1)

    @pytest.mark.parametrize("ranks,expected", sorted(CASE_WEIGHTED.items()))
    def test_weighted_interruption_table(self, ranks, expected):
        value, v, w = weighted_interruption_of(PriorityStrategy(ranks), _case_p_i())
        assert value == pytest.approx(expected, abs=5e-4)
        assert w[-1] == value
        assert v.weights.sum() == pytest.approx(1.0)

    def test_matches_brute_force_on_random_networks(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            k = int(rng.integers(2, 6))
            p_i = rng.uniform(0.05, 0.95, size=(k, k))
            best, ranks = _brute_force_best(p_i)
            chosen = stationary_optimal(p_i)
            assert chosen.ranks == ranks
            assert weighted_interruption_of(chosen, p_i)[0] == best

    def test_ties_prefer_smallest_ranks(self):
        p_i = np.array([[1.0, 0.4, 1.0], [0.5, 0.6, 1.0], [0.3, 0.2, 0.1]])
        _, ranks = _brute_force_best(p_i)
        assert stationary_optimal(p_i).ranks == ranks

    def test_workers_do_not_change_result(self):
        p_i = _case_p_i()
        assert stationary_optimal(p_i, workers=4) == stationary_optimal(p_i, workers=1)

    def test_search_budget(self):
        with pytest.raises(SearchBudgetError):
            stationary_optimal(np.full((9, 9), 0.5))

    def test_no_feasible_strategy(self):
        with pytest.raises(NoFeasibleStrategyError):
            stationary_optimal(np.ones((3, 3)))


class TestHeuristics:
    def test_single_hop_inspired(self):
        assert single_hop_inspired(CASE_P_S).ranks == (3, 2, 1)

    def test_single_hop_ties_by_index(self):
        assert single_hop_inspired([0.2, 0.2, 0.2]).ranks == (1, 2, 3)

    def test_density_inspired(self):
        tiers = case_tiers()
        assert density_inspired(tiers, {0, 1, 2}).ranks == (3, 2, 1)

    def test_density_order_with_gateways_ranked(self):
        chosen = density_inspired(case_tiers(), {0, 1, 2}, demote_gateways=False)
        assert [t + 1 for t in chosen.order()] == [3, 1, 2]
        assert chosen.ranks == (2, 3, 1)

    def test_density_demotes_unreachable(self):
        tiers = case_tiers()
        # tier 3 unreachable: it joins the gateway tier at the back
        assert density_inspired(tiers, {0, 1}).ranks == (3, 1, 2)


class TestPenultimateAdjust:
    def test_gateway_tier_moves_last(self):
        adjusted = penultimate_adjust(PriorityStrategy((1, 2, 3)), CASE_P_I)
        assert adjusted.ranks == (3, 1, 2)

    def test_delivering_order_kept(self):
        s = PriorityStrategy((3, 2, 1))
        assert penultimate_adjust(s, CASE_P_I) == s

    def test_explicit_delivery_mask(self):
        # empty gateway tier: its column is all ones, yet only tier 1 is barred
        p_i = np.array([[1.0, 0.3, 0.2], [1.0, 0.4, 0.1], [1.0, 0.2, 0.3]])
        s = PriorityStrategy((1, 2, 3))
        assert penultimate_adjust(s, p_i, np.array([False, True, True])).ranks == (3, 1, 2)
        assert penultimate_adjust(s, p_i, np.array([False, False, True])).ranks == (2, 3, 1)

    def test_all_delivering_unchanged(self):
        p_i = np.array([[0.5, 0.4], [0.3, 0.2]])
        s = PriorityStrategy((1, 2))
        assert penultimate_adjust(s, p_i) == s


class TestDynamicPriority:
    def test_minimises_remaining_route(self):
        p_i = _case_p_i()
        chosen = dynamic_priority(2, 4, p_i)
        values = [remaining_route_interruption(s, p_i, 2, 4) for s in all_strategies(3)]
        assert remaining_route_interruption(chosen, p_i, 2, 4) == min(values)

    def test_not_worse_than_static_strategy(self):
        p_i = _case_p_i()
        static = stationary_optimal(p_i)
        for tier in (0, 1, 2):
            chosen = dynamic_priority(tier, 6, p_i)
            assert remaining_route_interruption(chosen, p_i, tier, 6) <= remaining_route_interruption(
                static, p_i, tier, 6
            )

    def test_last_hop_prefers_likeliest_delivering_tier(self):
        assert dynamic_priority(2, 1, CASE_P_I).ranks == (3, 2, 1)
        assert dynamic_priority(1, 1, CASE_P_I).ranks == (3, 2, 1)

    def test_requires_a_hop(self):
        with pytest.raises(ValueError):
            dynamic_priority(0, 0, CASE_P_I)


class TestStrategyReports:
    def test_case_study_table(self):
        tiers, constraints = case_tiers(), case_constraints()
        reports = strategy_reports(_case_p_i(), tiers, constraints)
        assert len(reports) == 6
        assert reports[0].strategy.ranks == (3, 2, 1)
        assert [r.strategy.ranks for r in reports] == sorted(CASE_WEIGHTED, key=CASE_WEIGHTED.get)
        assert reports[0].analytic_multihop == pytest.approx(0.1031, abs=5e-4)
        for report in reports:
            assert report.w.sum() == pytest.approx(1.0)
