"""Tests for loading and validating experiment configs."""

import json
import math
import sys
import os

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.config import (
    apply_overrides,
    config_from_dict,
    dump_config,
    load_config,
    parse_angle,
)
from relay_reliability.errors import ConfigError
from relay_reliability.markov import PriorityStrategy

from .case_study import CONFIGS_DIR

MINIMAL = {
    "tiers": [{"height": 0, "count": 300}, {"height": 1200, "count": 720}],
}


class TestParseAngle:
    def test_expressions(self):
        assert parse_angle("pi/6") == pytest.approx(math.pi / 6)
        assert parse_angle("2*pi/3") == pytest.approx(2 * math.pi / 3)
        assert parse_angle("pi") == pytest.approx(math.pi)
        assert parse_angle("30deg") == pytest.approx(math.pi / 6)
        assert parse_angle(0.25) == 0.25
        assert parse_angle("0.25") == 0.25

    def test_rejects_garbage(self):
        for value in ("tau/2", True, None, "pi/0"):
            with pytest.raises(ValueError):
                parse_angle(value)


class TestConfigFromDict:
    def test_defaults(self):
        config = config_from_dict(MINIMAL)
        assert config.strategy_mode == "stationary_optimal"
        assert config.explicit_strategy is None
        assert config.constraints.theta_r == pytest.approx(math.pi / 6)
        assert config.constraints.d_th == 4000.0
        assert config.horizons == (4, 6, 8)
        assert config.link_budget is None

    def test_explicit_strategy(self):
        config = config_from_dict({**MINIMAL, "strategy": [2, 1]})
        assert config.strategy_mode == "explicit"
        assert config.explicit_strategy == PriorityStrategy((2, 1))

    def test_every_problem_is_reported(self):
        raw = {
            "tiers": [{"height": 300, "count": 10}],
            "constraints": {"theta_r": "wide", "d_th": -5},
            "iterations": 0,
            "colour": "blue",
        }
        with pytest.raises(ConfigError) as info:
            config_from_dict(raw)
        problems = info.value.problems
        assert len(problems) >= 4
        assert any(p.startswith("tiers[0]") for p in problems)
        assert any(p.startswith("constraints.theta_r") for p in problems)
        assert any(p.startswith("iterations") for p in problems)
        assert any(p.startswith("colour") for p in problems)

    def test_strategy_must_match_tiers(self):
        with pytest.raises(ConfigError):
            config_from_dict({**MINIMAL, "strategy": [1, 2, 3]})

    def test_strategy_with_generated_mode(self):
        with pytest.raises(ConfigError):
            config_from_dict({**MINIMAL, "strategy": [1, 2], "strategy_mode": "density"})

    def test_budget_in_db(self):
        config = config_from_dict({**MINIMAL, "link_budget": {"transmit_power_dbw": 15, "snr_threshold_db": 10}})
        assert config.link_budget.transmit_power == pytest.approx(10 ** 1.5)
        assert config.link_budget.snr_threshold == pytest.approx(10.0)

    def test_budget_key_conflict(self):
        with pytest.raises(ConfigError) as info:
            config_from_dict({**MINIMAL, "link_budget": {"transmit_power_w": 30, "transmit_power_dbw": 15}})
        assert "conflicts" in str(info.value)

    def test_metrics_modes(self):
        config = config_from_dict({**MINIMAL, "metrics": {"urllc_mode": "as_printed", "flow_mode": "as_printed"}})
        assert config.metrics.urllc_mode == "as_printed"
        assert config.metrics.flow_mode == "as_printed"
        with pytest.raises(ConfigError):
            config_from_dict({**MINIMAL, "metrics": {"flow_mode": "union"}})

    def test_flows(self):
        config = config_from_dict({**MINIMAL, "flows": {"dihedral_angles": [0, "pi/6", "pi/6"]}})
        assert config.flows.dihedral_angles == pytest.approx((0.0, math.pi / 6, math.pi / 6))
        with pytest.raises(ConfigError):
            config_from_dict({**MINIMAL, "flows": {"dihedral_angles": ["pi/2"]}})

    def test_sweep_kind(self):
        config = config_from_dict({**MINIMAL, "sweep": {"kind": "theta_m", "thetas": ["pi/2", "pi"]}})
        assert config.sweep["thetas"] == pytest.approx([math.pi / 2, math.pi])
        with pytest.raises(ConfigError):
            config_from_dict({**MINIMAL, "sweep": {"kind": "spiral"}})


class TestLoadConfig:
    def test_shipped_configs_load(self):
        names = sorted(n for n in os.listdir(CONFIGS_DIR) if n.endswith(".json"))
        assert "case_study.json" in names
        for name in names:
            load_config(os.path.join(CONFIGS_DIR, name))

    def test_case_study_file(self):
        config = load_config(os.path.join(CONFIGS_DIR, "case_study.json"))
        assert [t.count for t in config.tiers] == [300, 140, 720]
        assert config.explicit_strategy == PriorityStrategy((3, 2, 1))
        assert config.constraints.theta_m == pytest.approx(math.pi)

    def test_bad_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"tiers": [\n  {"height": 0,}\n]}\n')
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert "line 2" in str(info.value)
        assert info.value.path == str(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_dump_and_reload(self, tmp_path):
        config = load_config(os.path.join(CONFIGS_DIR, "metrics_four_tier.json"))
        config = apply_overrides(config, seed=9)
        path = tmp_path / "dumped.json"
        dump_config(config, path)
        assert load_config(path) == config

    def test_infinite_distance_is_written_as_text(self, tmp_path):
        config = config_from_dict({**MINIMAL, "constraints": {"d_th": "inf"}})
        path = tmp_path / "los.json"
        dump_config(config, path)
        assert json.loads(path.read_text())["constraints"]["d_th"] == "inf"
        assert math.isinf(load_config(path).constraints.d_th)


class TestApplyOverrides:
    def test_mode_and_ranks(self):
        config = config_from_dict(MINIMAL)
        assert apply_overrides(config, strategy="single_hop").strategy_mode == "single_hop"
        explicit = apply_overrides(config, strategy="2,1")
        assert explicit.strategy_mode == "explicit"
        assert explicit.explicit_strategy == PriorityStrategy((2, 1))

    def test_invalid_overrides(self):
        config = config_from_dict(MINIMAL)
        with pytest.raises(ConfigError) as info:
            apply_overrides(config, iterations=0, seed=-1, strategy="fast")
        assert len(info.value.problems) == 3

    def test_horizons(self):
        config = config_from_dict(MINIMAL)
        assert apply_overrides(config, horizons=[3, 5]).horizons == (3, 5)
        with pytest.raises(ConfigError):
            apply_overrides(config, horizons=[1])

    def test_metric_modes(self):
        config = config_from_dict(MINIMAL)
        changed = apply_overrides(config, flow_mode="as_printed", urllc_mode="as_printed")
        assert changed.metrics.flow_mode == "as_printed"
        assert changed.metrics.urllc_mode == "as_printed"
        assert changed.metrics.gamma_db == config.metrics.gamma_db
        assert config.metrics.flow_mode == "independent"

    def test_unknown_metric_mode(self):
        with pytest.raises(ConfigError) as info:
            apply_overrides(config_from_dict(MINIMAL), flow_mode="any", urllc_mode="loose")
        assert len(info.value.problems) == 2
