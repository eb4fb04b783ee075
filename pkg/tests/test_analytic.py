"""Tests for the closed-form single-hop interruption."""

import math
import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.analytic import (
    delivering_tiers,
    relay_interruption_matrix,
    search_exponent,
    single_hop_from_matrix,
    single_hop_vector,
    tier_interruption,
    tier_interruption_matrix,
    void_probability,
)
from relay_reliability.geometry import TierSpec

from .case_study import CASE_P_I, CASE_P_S, case_constraints, case_tiers, no_satellite_tiers


class TestVoidProbability:
    def test_power_form(self):
        assert void_probability(0.1, 3) == pytest.approx(0.9 ** 3)

    def test_no_searchers(self):
        assert void_probability(0.3, 0) == 1.0
        assert void_probability(0.3, -1) == 1.0

    def test_empty_region(self):
        assert void_probability(0.0, 500) == 1.0

    def test_log_space_matches_direct_power(self):
        assert void_probability(1e-4, 50_000) == pytest.approx((1 - 1e-4) ** 50_000, rel=1e-10)


class TestSearchExponent:
    def test_own_tier_excludes_self(self):
        tiers = case_tiers()
        assert search_exponent(2, 2, tiers) == 719
        assert search_exponent(0, 2, tiers) == 720

    def test_empty_own_tier(self):
        assert search_exponent(1, 1, no_satellite_tiers()) == 0


class TestInterruptionMatrix:
    def test_case_study_values(self):
        p_i = tier_interruption_matrix(case_tiers(), case_constraints())
        np.testing.assert_allclose(p_i, CASE_P_I, atol=5e-4)

    def test_gateway_pair_is_exactly_one(self):
        assert tier_interruption(0, 0, case_tiers(), case_constraints()) == 1.0

    def test_empty_tier_is_exactly_one(self):
        p_i = tier_interruption_matrix(no_satellite_tiers(), case_constraints())
        assert p_i[0, 1] == 1.0
        assert p_i[1, 1] == 1.0
        assert p_i[1, 0] < 1.0

    def test_more_devices_lower_interruption(self):
        constraints = case_constraints()
        sparse = [TierSpec.at_height(0, 300), TierSpec.at_height(1200, 200)]
        dense = [TierSpec.at_height(0, 300), TierSpec.at_height(1200, 800)]
        assert tier_interruption(0, 1, dense, constraints) < tier_interruption(0, 1, sparse, constraints)

    def test_relay_matrix_counts_whole_own_tier(self):
        tiers, constraints = case_tiers(), case_constraints()
        printed = tier_interruption_matrix(tiers, constraints)
        relay = relay_interruption_matrix(tiers, constraints)
        off_diagonal = ~np.eye(3, dtype=bool)
        np.testing.assert_array_equal(relay[off_diagonal], printed[off_diagonal])
        assert relay[2, 2] < printed[2, 2]
        assert relay[1, 1] < printed[1, 1]
        assert search_exponent(2, 2, tiers, exclude_self=False) == 720

    def test_entries_are_probabilities(self):
        p_i = tier_interruption_matrix(case_tiers(), case_constraints())
        assert np.all((p_i >= 0.0) & (p_i <= 1.0))


class TestDeliveringTiers:
    def test_case_study(self):
        np.testing.assert_array_equal(delivering_tiers(case_tiers(), case_constraints()), [False, True, True])

    def test_low_shell_below_minimum_hop(self):
        tiers = [TierSpec.at_height(0, 300), TierSpec.at_height(300, 100), TierSpec.at_height(900, 100)]
        np.testing.assert_array_equal(delivering_tiers(tiers, case_constraints()), [False, False, True])

    def test_geometry_only(self):
        tiers = [TierSpec.at_height(0, 0), TierSpec.at_height(1200, 0)]
        np.testing.assert_array_equal(delivering_tiers(tiers, case_constraints()), [False, True])


class TestSingleHop:
    def test_case_study_values(self):
        p_s = single_hop_vector(case_tiers(), case_constraints(), exclude_self=False)
        np.testing.assert_allclose(p_s, CASE_P_S, atol=5e-4)

    def test_rounding_excess_is_clipped(self):
        assert single_hop_from_matrix(np.array([[1.0000000000000002, 1.0]]))[0] == 1.0

    def test_row_product(self):
        p_i = np.array([[0.5, 0.4], [1.0, 0.2]])
        np.testing.assert_allclose(single_hop_from_matrix(p_i), [0.2, 0.2])

    def test_small_network_matches_formula(self):
        tiers = [TierSpec.at_height(0, 5), TierSpec.at_height(900, 6)]
        constraints = case_constraints()
        p_i = tier_interruption_matrix(tiers, constraints)
        r_1, r_2 = tiers[0].radius, tiers[1].radius
        theta = math.acos((r_1 ** 2 + r_2 ** 2 - 4000.0 ** 2) / (2 * r_1 * r_2))
        theta = min(theta, math.acos(r_1 / r_2))
        area = (math.pi / 6) / (4 * math.pi) * (math.cos(math.pi / 10) - math.cos(theta))
        assert p_i[0, 1] == pytest.approx((1 - area) ** 6)
        assert p_i[1, 0] == pytest.approx((1 - area) ** 5)
