"""Tests for the parameter sweeps."""

import math
import sys
import os

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.geometry import TierSpec
from relay_reliability.link_metrics import LinkBudget
from relay_reliability.sweeps import (
    COMPARED_STRATEGIES,
    compared_strategies,
    equal_split_tiers,
    nonuniformity_tiers,
    run_sweep,
    satellites_for_target,
    sweep_devices,
    sweep_height_count,
    sweep_nonuniformity,
    sweep_theta_m,
    sweep_tiers,
)

from .case_study import case_constraints, case_tiers, slow


class TestLayouts:
    def test_nonuniformity_counts(self):
        tiers = nonuniformity_tiers(0.1)
        assert [t.count for t in tiers] == [240, 270, 300, 330, 360]
        assert [t.height for t in tiers] == [0.0, 300.0, 600.0, 900.0, 1200.0]
        assert sum(t.count for t in nonuniformity_tiers(-0.3)) == 1500

    def test_fully_tilted_layout_has_no_gateways(self):
        assert nonuniformity_tiers(0.5)[0].count == 0

    def test_equal_split(self):
        tiers = equal_split_tiers(3, 1500)
        assert [t.count for t in tiers] == [500, 500, 500]
        assert [t.height for t in tiers] == [0.0, 600.0, 900.0]
        assert [t.height for t in equal_split_tiers(4, 1500)] == [0.0, 525.0, 750.0, 975.0]
        assert sum(t.count for t in equal_split_tiers(4, 1502)) == 1502


class TestSweeps:
    def test_nonuniformity_rows(self):
        rows = sweep_nonuniformity(case_constraints(), alphas=[-0.3, 0.3, 0.5])
        assert [r.x for r in rows] == [-0.3] * 4 + [0.3] * 4 + [0.5] * 4
        assert [r.strategy for r in rows[:4]] == list(COMPARED_STRATEGIES)
        assert {r.metric for r in rows} == {"analytic"}
        assert all(0.0 <= r.value <= 1.0 for r in rows)

    def test_upper_heavy_layout_is_more_reliable(self):
        rows = sweep_nonuniformity(case_constraints(), alphas=[-0.3, 0.3])
        best = {r.x: r.value for r in rows if r.strategy == "exhaustive"}
        assert best[0.3] < best[-0.3]

    def test_empty_gateway_tier_still_delivers(self):
        rows = sweep_nonuniformity(case_constraints(), alphas=[0.5])
        best = [r.value for r in rows if r.strategy == "exhaustive"]
        assert best[0] < 1.0

    def test_exhaustive_is_the_floor(self):
        for alpha in (-0.2, 0.2):
            rows = sweep_nonuniformity(case_constraints(), alphas=[alpha])
            values = {r.strategy: r.value for r in rows}
            assert values["exhaustive"] == min(values.values())

    def test_tier_count_rows(self):
        rows = sweep_tiers(case_constraints(), tier_counts=[2, 3])
        assert [(r.x, r.strategy) for r in rows] == [
            (k, name) for k in (2, 3) for name in COMPARED_STRATEGIES
        ]
        assert {r.metric for r in rows} == {"analytic"}

    def test_compared_strategies_on_case_study(self):
        compared = compared_strategies(case_tiers(), case_constraints())
        assert compared["stationary_optimal"][0].ranks == (3, 2, 1)
        assert compared["stationary_optimal"][1] == pytest.approx(0.1031, abs=5e-4)
        assert compared["exhaustive"][1] <= compared["stationary_optimal"][1]

    def test_height_count_grid(self):
        rows = sweep_height_count(case_constraints(), heights=[600.0, 1200.0], counts=[200, 800])
        assert len(rows) == 4
        assert [r.point for r in rows] == [0, 1, 2, 3]
        assert {r.y_name for r in rows} == {"satellites"}

    def test_more_satellites_help(self):
        rows = sweep_height_count(case_constraints(), heights=[1200.0], counts=[400, 1600])
        assert rows[1].value <= rows[0].value

    def test_theta_m_rows(self):
        rows = sweep_theta_m(case_tiers(), case_constraints(), thetas=[math.pi / 2, math.pi])
        by_metric = {}
        for row in rows:
            by_metric.setdefault(row.metric, []).append(row.value)
        assert set(by_metric) == {"single_flow", "multi_flow"}
        for single, multi in zip(by_metric["single_flow"], by_metric["multi_flow"]):
            assert multi < single

    def test_devices_rows(self):
        rows = sweep_devices(case_constraints(), LinkBudget(), totals=[400, 1600])
        assert {r.metric for r in rows} == {"availability", "coverage", "urllc"}
        assert len(rows) == 6
        urllc = {r.x: r.value for r in rows if r.metric == "urllc"}
        coverage = {r.x: r.value for r in rows if r.metric == "coverage"}
        assert all(urllc[x] <= coverage[x] for x in coverage)

    def test_sparse_devices_do_not_stop_the_sweep(self):
        rows = sweep_devices(case_constraints(), LinkBudget(), totals=[400])
        assert {r.metric for r in rows} == {"availability", "coverage", "urllc"}
        assert all(0.0 <= r.value <= 1.0 for r in rows)

    def test_coverage_grows_with_devices(self):
        rows = sweep_devices(case_constraints(), LinkBudget(), totals=[800, 1600, 2400])
        coverage = [r.value for r in rows if r.metric == "coverage"]
        assert all(later >= earlier - 1e-9 for earlier, later in zip(coverage, coverage[1:]))


class TestSatellitesForTarget:
    def test_bisection_hits_target(self):
        def evaluate(tiers):
            return 1.0 / (1.0 + tiers[1].count / 100.0)

        needed = satellites_for_target(300, 1200.0, case_constraints(), evaluate=evaluate)
        assert abs(evaluate([None, TierSpec.at_height(1200.0, needed)]) - 0.1) <= 0.002

    def test_unreachable_target(self):
        assert satellites_for_target(300, 1200.0, case_constraints(), evaluate=lambda tiers: 0.5) is None


class TestRunSweep:
    def test_dispatch(self):
        rows = run_sweep({"kind": "theta_m", "thetas": [math.pi], "dihedral_angles": [0.0, math.pi / 6]},
                         case_tiers(), case_constraints())
        assert {r.sweep for r in rows} == {"theta_m"}

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            run_sweep({"kind": "spiral"}, case_tiers(), case_constraints())

    def test_unknown_parameter(self):
        with pytest.raises(TypeError):
            run_sweep({"kind": "tiers", "layers": [2]}, case_tiers(), case_constraints())


@slow
class TestSimulatedTrends:
    def test_upper_heavy_layouts_beat_lower_heavy(self):
        constraints = case_constraints()
        for alpha in (0.1, 0.3, 0.5):
            rows = sweep_nonuniformity(constraints, alphas=[-alpha, alpha], iterations=10_000, seed=1, workers=4)
            simulated = [r.value for r in rows if r.metric == "simulated" and r.strategy == "stationary_optimal"]
            assert simulated[1] < simulated[0]

    def test_more_tiers_fewer_interruptions(self):
        rows = sweep_tiers(case_constraints(), tier_counts=[2, 4], iterations=10_000, seed=1, workers=4)
        simulated = [r.value for r in rows if r.metric == "simulated" and r.strategy == "exhaustive"]
        assert simulated[0] > simulated[-1]
