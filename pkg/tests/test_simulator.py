"""Tests for the Monte Carlo route simulator."""

import math
import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.analytic import tier_interruption_matrix
from relay_reliability.errors import SearchBudgetError
from relay_reliability.geometry import (
    ANGLE_TOL,
    SpherePoint,
    TierSpec,
    dome_angle,
    feasible,
    link_dome_limit,
    max_dome_matrix,
)
from relay_reliability.markov import PriorityStrategy
from relay_reliability.simulator import (
    Outcome,
    RoutePlan,
    estimate,
    estimate_multiflow,
    exhaustive_search,
    run_route,
    trial_rng,
    void_frequency,
)
from relay_reliability.strategy import penultimate_adjust

from .case_study import CASE_P_I, case_constraints, case_tiers, no_satellite_tiers, slow

S_321 = PriorityStrategy((3, 2, 1))


def _within(observed, expected, trials, sigmas=4.0, slack=0.0):
    return abs(observed - expected) <= sigmas * math.sqrt(expected * (1 - expected) / trials) + slack


class TestRunRoute:
    def test_no_satellites_is_interrupted_at_first_hop(self):
        trace = run_route(no_satellite_tiers(), case_constraints(), PriorityStrategy((1, 2)), trial_rng(0, 0))
        assert trace.outcome is Outcome.INTERRUPTED
        assert trace.interrupted_at == 1
        assert trace.hops == 1
        assert not trace.success

    def test_hops_count_relay_selections(self):
        tiers, constraints = case_tiers(), case_constraints()
        for trial in range(10):
            trace = run_route(tiers, constraints, S_321, trial_rng(21, trial))
            if trace.success:
                assert trace.hops == len(trace.tier_sequence) - 1
                assert len(trace.hop_distances) == trace.hops + 1
            else:
                assert trace.hops == trace.interrupted_at == len(trace.tier_sequence)

    def test_last_relay_can_reach_the_ground(self):
        tiers, constraints = case_tiers(), case_constraints()
        plan = RoutePlan.build(tiers, constraints, PriorityStrategy((1, 2, 3)))
        for trial in range(20):
            trace = run_route(tiers, constraints, plan.strategy, trial_rng(6, trial), plan=plan)
            if trace.success:
                assert plan.delivering[trace.tier_sequence[-1]]

    def test_replayed_hops_satisfy_constraints(self):
        tiers, constraints = case_tiers(), case_constraints(theta_m=2 * math.pi / 3)
        theta_max = max_dome_matrix(tiers, constraints)
        r_1 = tiers[0].radius
        receiver = SpherePoint.from_angles(0, r_1, constraints.theta_m)
        successes = 0
        for trial in range(20):
            trace = run_route(tiers, constraints, S_321, trial_rng(99, trial), record_path=True)
            relays = [SpherePoint(t, p) for t, p in zip(trace.tier_sequence, trace.path)]
            for current, nxt in zip(relays, relays[1:]):
                assert feasible(nxt, current, receiver, constraints, theta_max[current.tier_index, nxt.tier_index])
            assert len(trace.hop_distances) == len(trace.path) - 1
            if trace.success:
                successes += 1
                last = relays[-1]
                limit = link_dome_limit(tiers[last.tier_index].radius, r_1, constraints.d_th)
                assert dome_angle(last, receiver) <= limit + ANGLE_TOL
                np.testing.assert_allclose(trace.path[-1], receiver.position)
        assert successes > 0

    def test_gateways_never_deliver_directly(self):
        tiers, constraints = case_tiers(), case_constraints()
        for trial in range(10):
            trace = run_route(tiers, constraints, S_321, trial_rng(5, trial))
            if trace.success:
                assert trace.tier_sequence[-1] != 0

    def test_same_stream_same_route(self):
        tiers, constraints = case_tiers(), case_constraints()
        first = run_route(tiers, constraints, S_321, trial_rng(3, 17))
        second = run_route(tiers, constraints, S_321, trial_rng(3, 17))
        assert first.tier_sequence == second.tier_sequence
        assert first.hop_distances == second.hop_distances


class TestRoutePlan:
    def test_penultimate_strategy_near_the_receiver(self):
        plan = RoutePlan.build(case_tiers(), case_constraints(), PriorityStrategy((1, 2, 3)))
        assert plan.ranks_for(0, math.pi) == PriorityStrategy((1, 2, 3))
        assert plan.ranks_for(0, plan.theta_bar) == penultimate_adjust(
            PriorityStrategy((1, 2, 3)), CASE_P_I, plan.delivering
        )

    def test_search_near_the_receiver_skips_non_delivering_tiers(self):
        plan = RoutePlan.build(case_tiers(), case_constraints(), PriorityStrategy((1, 2, 3)))
        assert plan.search_order(0, math.pi) == [0, 1, 2]
        assert plan.search_order(0, plan.theta_bar) == [1, 2]
        assert plan.search_order(2, 2.0 * plan.theta_bar) == [1, 2]

    def test_plan_uses_route_chain_inputs(self):
        plan = RoutePlan.build(case_tiers(), case_constraints(), S_321)
        np.testing.assert_array_equal(plan.delivering, [False, True, True])
        assert plan.theta_bar == pytest.approx(0.4915, abs=5e-4)
        assert plan.max_hops == 256

    def test_dynamic_plan_caches_per_remaining_hops(self):
        plan = RoutePlan.build(case_tiers(), case_constraints(), S_321, dynamic=True)
        first = plan.ranks_for(2, 3.0)
        assert plan.ranks_for(2, 3.0) is first

    def test_infeasible_network_keeps_static_strategy(self):
        plan = RoutePlan.build(no_satellite_tiers(), case_constraints(), PriorityStrategy((2, 1)), dynamic=True)
        assert plan.theta_bar == 0.0
        assert plan.ranks_for(0, 1.0) == PriorityStrategy((2, 1))

    def test_strategy_must_rank_every_tier(self):
        with pytest.raises(ValueError):
            RoutePlan.build(case_tiers(), case_constraints(), PriorityStrategy((1, 2)))


class TestEstimate:
    def test_single_trial(self):
        result = estimate(case_tiers(), case_constraints(), S_321, iterations=1, seed=0)
        assert result.interruption_probability in (0.0, 1.0)
        assert result.standard_error == 0.0
        assert sum(result.hop_histogram.values()) == 1

    def test_tallies_are_consistent(self):
        result = estimate(case_tiers(), case_constraints(), S_321, iterations=30, seed=4)
        assert sum(result.hop_histogram.values()) == 30
        assert result.per_hop_reached[0] == 30
        assert result.per_hop_interruptions.sum() == round(result.interruption_probability * 30)
        assert np.all(result.per_hop_interruption_rates <= 1.0)
        assert sum(result.success_histogram.values()) == 30 - result.per_hop_interruptions.sum()

    def test_worker_count_does_not_change_estimate(self):
        serial = estimate(case_tiers(), case_constraints(), S_321, iterations=24, seed=11, workers=1)
        parallel = estimate(case_tiers(), case_constraints(), S_321, iterations=24, seed=11, workers=2)
        assert parallel.interruption_probability == serial.interruption_probability
        assert parallel.hop_histogram == serial.hop_histogram
        np.testing.assert_array_equal(parallel.per_hop_interruptions, serial.per_hop_interruptions)

    def test_no_satellites_always_interrupted(self):
        result = estimate(no_satellite_tiers(), case_constraints(), PriorityStrategy((1, 2)), iterations=5, seed=0)
        assert result.interruption_probability == 1.0
        assert math.isnan(result.mean_hops_success)

    def test_dynamic_routes_run(self):
        result = estimate(case_tiers(), case_constraints(), S_321, iterations=10, seed=2, dynamic=True)
        assert 0.0 <= result.interruption_probability <= 1.0

    def test_strategy_ordering_on_case_study(self):
        tiers, constraints = case_tiers(), case_constraints()
        best = estimate(tiers, constraints, S_321, iterations=2000, seed=31)
        worst = estimate(tiers, constraints, PriorityStrategy((1, 2, 3)), iterations=2000, seed=31)
        assert abs(best.interruption_probability - 0.1033) <= 0.04
        assert worst.interruption_probability > best.interruption_probability
        assert 5.0 <= best.mean_hops_success <= 7.0

    def test_needs_iterations(self):
        with pytest.raises(ValueError):
            estimate(case_tiers(), case_constraints(), S_321, iterations=0, seed=0)

    def test_exhaustive_search_budget(self):
        tiers = [TierSpec.at_height(100.0 * i, 10) for i in range(9)]
        with pytest.raises(SearchBudgetError):
            exhaustive_search(tiers, case_constraints(), iterations=1, seed=0)


class TestVoidFrequency:
    @pytest.mark.parametrize("i,j", [(0, 2), (2, 1), (2, 2)])
    def test_matches_closed_form(self, i, j):
        tiers, constraints = case_tiers(), case_constraints()
        expected = tier_interruption_matrix(tiers, constraints)[i, j]
        result = void_frequency(tiers, constraints, i, j, trials=2000, seed=8)
        assert _within(result.frequency, expected, 2000)

    def test_small_network(self):
        tiers = [TierSpec.at_height(0, 4), TierSpec.at_height(900, 8)]
        constraints = case_constraints()
        expected = tier_interruption_matrix(tiers, constraints)[1, 0]
        result = void_frequency(tiers, constraints, 1, 0, trials=20_000, seed=1)
        assert _within(result.frequency, expected, 20_000)


class TestEstimateMultiflow:
    def test_all_flows_must_fail(self):
        tiers, constraints = case_tiers(), case_constraints(theta_m=2 * math.pi / 3)
        result = estimate_multiflow(tiers, constraints, S_321, [0.0, math.pi / 6, math.pi / 6], iterations=20, seed=3)
        assert result.flow_interruption.shape == (3,)
        assert result.interruption_probability <= result.flow_interruption.min()

    def test_needs_a_flow(self):
        with pytest.raises(ValueError):
            estimate_multiflow(case_tiers(), case_constraints(), S_321, [], iterations=1, seed=0)


@slow
class TestCaseStudySimulation:
    def test_best_strategy(self):
        result = estimate(case_tiers(), case_constraints(), S_321, iterations=100_000, seed=2024, workers=4)
        assert _within(result.interruption_probability, 0.1033, 100_000, sigmas=3, slack=0.02)
        assert 5.6 <= result.mean_hops_success <= 6.5

    def test_worst_strategy(self):
        tiers, constraints = case_tiers(), case_constraints()
        best = estimate(tiers, constraints, S_321, 100_000, 2024, workers=4)
        worst = estimate(tiers, constraints, PriorityStrategy((1, 2, 3)), 100_000, 2024, workers=4)
        assert worst.interruption_probability > best.interruption_probability + 0.03

    def test_void_frequency_million_draws(self):
        tiers = [TierSpec.at_height(0, 6), TierSpec.at_height(600, 7), TierSpec.at_height(1200, 7)]
        constraints = case_constraints()
        p_i = tier_interruption_matrix(tiers, constraints)
        for i, j in [(0, 1), (1, 2), (2, 2)]:
            result = void_frequency(tiers, constraints, i, j, trials=1_000_000, seed=i * 3 + j)
            assert _within(result.frequency, p_i[i, j], 1_000_000, sigmas=3)
