"""Experiment configuration: JSON files in, validated dataclasses out.

Angles may be written as radians or as strings such as ``"pi/6"``,
``"2*pi/3"`` or ``"30deg"``.  Link-budget entries may use linear or dB keys;
both are stored linear.  :func:`dump_config` writes linear values and
radians, so loading its output reproduces the same configuration.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigError, InvalidGeometryError
from .geometry import ConstraintSet, TierSpec, constraint_problems
from .link_metrics import FLOW_MODES, FlowSpec, LinkBudget, db_to_linear
from .markov import PriorityStrategy
from .pipeline import DEFAULT_HORIZONS, STRATEGY_MODES

logger = logging.getLogger(__name__)

DEFAULT_CONSTRAINTS = {"theta_r": math.pi / 6, "theta_s": math.pi / 10, "d_th": 4000.0, "theta_m": math.pi}
DEFAULT_ITERATIONS = 100_000
SWEEP_KINDS = ("nonuniformity", "tiers", "height_count", "tradeoff", "devices", "theta_m")
URLLC_MODES = ("dimensional", "as_printed")

_PI_EXPR = re.compile(
    r"^\s*(?:(?P<coef>[0-9.]+(?:[eE][-+]?\d+)?)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>[0-9.]+(?:[eE][-+]?\d+)?))?\s*$"
)
_DEG_EXPR = re.compile(r"^\s*(?P<value>[-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*deg\s*$")

# JSON key -> (LinkBudget field, is_db)
_BUDGET_KEYS = {
    "carrier_frequency_hz": ("carrier_frequency", False),
    "transmit_power_w": ("transmit_power", False),
    "transmit_power_dbw": ("transmit_power", True),
    "antenna_gain": ("antenna_gain", False),
    "antenna_gain_dbi": ("antenna_gain", True),
    "bandwidth_hz": ("bandwidth", False),
    "noise_power_w": ("noise_power", False),
    "rain_attenuation": ("rain_attenuation", False),
    "rain_attenuation_db": ("rain_attenuation", True),
    "package_size_bits": ("package_size", False),
    "sr_b": ("sr_b", False),
    "sr_m": ("sr_m", False),
    "sr_omega": ("sr_omega", False),
    "snr_threshold": ("snr_threshold", False),
    "snr_threshold_db": ("snr_threshold", True),
    "latency_threshold_s": ("latency_threshold", False),
}
_BUDGET_DUMP_KEYS = {fld: key for key, (fld, is_db) in _BUDGET_KEYS.items() if not is_db}


@dataclass
class MetricsGrid:
    """Grids evaluated by the metrics command."""

    gamma_db: List[float] = field(default_factory=lambda: [-5.0, 0.0, 5.0, 10.0])
    tau: List[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])
    dihedral_angles: List[float] = field(default_factory=lambda: [0.0, math.pi / 12, math.pi / 6, math.pi / 4])
    urllc_mode: str = "dimensional"
    flow_mode: str = "independent"


@dataclass
class ExperimentConfig:
    tiers: List[TierSpec]
    constraints: ConstraintSet
    strategy_mode: str = "stationary_optimal"
    explicit_strategy: Optional[PriorityStrategy] = None
    iterations: int = DEFAULT_ITERATIONS
    seed: int = 0
    horizons: Tuple[int, ...] = DEFAULT_HORIZONS
    link_budget: Optional[LinkBudget] = None
    flows: Optional[FlowSpec] = None
    metrics: MetricsGrid = field(default_factory=MetricsGrid)
    sweep: Optional[Dict[str, Any]] = None


def parse_angle(value: Any) -> float:
    """Radians from a number or an expression like ``"pi/6"`` or ``"30deg"``."""
    if isinstance(value, bool):
        raise ValueError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"not an angle: {value!r}")
    match = _PI_EXPR.match(value)
    if match:
        coef = float(match.group("coef")) if match.group("coef") else 1.0
        den = float(match.group("den")) if match.group("den") else 1.0
        if den == 0.0:
            raise ValueError(f"zero denominator in angle {value!r}")
        return coef * math.pi / den
    match = _DEG_EXPR.match(value)
    if match:
        return math.radians(float(match.group("value")))
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"cannot parse angle {value!r}") from None


def _parse_distance(value: Any) -> float:
    if value is None or (isinstance(value, str) and value.strip().lower() in ("inf", "infinity")):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ValueError(f"not a distance: {value!r}")
    return float(value)


def _parse_tiers(raw: Any, problems: List[str]) -> List[TierSpec]:
    if not isinstance(raw, list) or not raw:
        problems.append("tiers: at least one tier is required")
        return []
    tiers = []
    for index, entry in enumerate(raw):
        if not isinstance(entry, dict) or "height" not in entry or "count" not in entry:
            problems.append(f"tiers[{index}]: expected an object with 'height' and 'count'")
            continue
        count = entry["count"]
        if isinstance(count, bool) or not isinstance(count, int):
            problems.append(f"tiers[{index}].count: expected an integer, got {count!r}")
            continue
        try:
            tiers.append(TierSpec.at_height(float(entry["height"]), count))
        except (TypeError, ValueError, InvalidGeometryError) as exc:
            problems.append(f"tiers[{index}]: {exc}")
    if tiers and len(tiers) == len(raw):
        if tiers[0].height != 0.0:
            problems.append("tiers[0]: the first tier must be the terrestrial tier (height 0)")
        for index, (lower, upper) in enumerate(zip(tiers, tiers[1:]), start=1):
            if not upper.radius > lower.radius:
                problems.append(f"tiers[{index}]: heights must be strictly increasing")
    return tiers


def _parse_constraints(raw: Any, problems: List[str]) -> Optional[ConstraintSet]:
    raw = raw or {}
    if not isinstance(raw, dict):
        problems.append("constraints: expected an object")
        return None
    values = dict(DEFAULT_CONSTRAINTS)
    for key in raw:
        if key not in values:
            problems.append(f"constraints.{key}: unknown field")
    for key in ("theta_r", "theta_s", "theta_m"):
        if key in raw:
            try:
                values[key] = parse_angle(raw[key])
            except ValueError as exc:
                problems.append(f"constraints.{key}: {exc}")
    if "d_th" in raw:
        try:
            values["d_th"] = _parse_distance(raw["d_th"])
        except ValueError as exc:
            problems.append(f"constraints.d_th: {exc}")
    found = constraint_problems(**values)
    if found:
        problems.extend(f"constraints: {p}" for p in found)
        return None
    return ConstraintSet(**values)


def _parse_strategy(raw: Dict[str, Any], k: int, problems: List[str]) -> Tuple[str, Optional[PriorityStrategy]]:
    text = raw.get("strategy")
    mode = raw.get("strategy_mode", "explicit" if text is not None else "stationary_optimal")
    if mode not in STRATEGY_MODES:
        problems.append(f"strategy_mode: expected one of {', '.join(STRATEGY_MODES)}, got {mode!r}")
        return "stationary_optimal", None
    if mode != "explicit":
        if text is not None:
            problems.append(f"strategy: only allowed with strategy_mode 'explicit', not {mode!r}")
        return mode, None
    if text is None:
        problems.append("strategy: strategy_mode 'explicit' needs a strategy")
        return mode, None
    try:
        strategy = PriorityStrategy(tuple(text)) if isinstance(text, list) else PriorityStrategy.parse(str(text))
    except (TypeError, ValueError) as exc:
        problems.append(f"strategy: {exc}")
        return mode, None
    if k and strategy.size != k:
        problems.append(f"strategy: ranks {k} tiers expected, got {strategy.size}")
    return mode, strategy


def _parse_budget(raw: Any, problems: List[str]) -> Optional[LinkBudget]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        problems.append("link_budget: expected an object")
        return None
    values: Dict[str, float] = {}
    sources: Dict[str, str] = {}
    for key, value in raw.items():
        if key not in _BUDGET_KEYS:
            problems.append(f"link_budget.{key}: unknown field")
            continue
        name, is_db = _BUDGET_KEYS[key]
        if name in sources:
            problems.append(f"link_budget.{key}: conflicts with link_budget.{sources[name]}")
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"link_budget.{key}: expected a number, got {value!r}")
            continue
        sources[name] = key
        values[name] = db_to_linear(value) if is_db else float(value)
    try:
        return LinkBudget(**values)
    except ValueError as exc:
        problems.append(f"link_budget: {exc}")
        return None


def _parse_angle_list(raw: Any, where: str, problems: List[str]) -> List[float]:
    if not isinstance(raw, list):
        problems.append(f"{where}: expected a list")
        return []
    angles = []
    for index, value in enumerate(raw):
        try:
            angles.append(parse_angle(value))
        except ValueError as exc:
            problems.append(f"{where}[{index}]: {exc}")
    return angles


def _parse_number_list(raw: Any, where: str, problems: List[str]) -> List[float]:
    if not isinstance(raw, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        problems.append(f"{where}: expected a list of numbers")
        return []
    return [float(v) for v in raw]


def _parse_metrics(raw: Any, problems: List[str]) -> MetricsGrid:
    grid = MetricsGrid()
    if raw is None:
        return grid
    if not isinstance(raw, dict):
        problems.append("metrics: expected an object")
        return grid
    if "gamma_db" in raw:
        grid.gamma_db = _parse_number_list(raw["gamma_db"], "metrics.gamma_db", problems)
    if "tau" in raw:
        grid.tau = _parse_number_list(raw["tau"], "metrics.tau", problems)
        if any(t <= 0.0 for t in grid.tau):
            problems.append("metrics.tau: latency thresholds must be positive")
    if "dihedral_angles" in raw:
        grid.dihedral_angles = _parse_angle_list(raw["dihedral_angles"], "metrics.dihedral_angles", problems)
        if any(not 0.0 <= a < math.pi / 2 for a in grid.dihedral_angles):
            problems.append("metrics.dihedral_angles: each angle must lie in [0, pi/2)")
    mode = raw.get("urllc_mode", grid.urllc_mode)
    if mode not in URLLC_MODES:
        problems.append(f"metrics.urllc_mode: expected one of {', '.join(URLLC_MODES)}, got {mode!r}")
    else:
        grid.urllc_mode = mode
    flow_mode = raw.get("flow_mode", grid.flow_mode)
    if flow_mode not in FLOW_MODES:
        problems.append(f"metrics.flow_mode: expected one of {', '.join(FLOW_MODES)}, got {flow_mode!r}")
    else:
        grid.flow_mode = flow_mode
    return grid


def _parse_sweep(raw: Any, problems: List[str]) -> Optional[Dict[str, Any]]:
    if raw is None:
        return None
    if not isinstance(raw, dict) or raw.get("kind") not in SWEEP_KINDS:
        problems.append(f"sweep.kind: expected one of {', '.join(SWEEP_KINDS)}")
        return None
    sweep = dict(raw)
    for key in ("thetas", "dihedral_angles", "alphas"):
        if key in sweep:
            parse = _parse_angle_list if key != "alphas" else _parse_number_list
            sweep[key] = parse(sweep[key], f"sweep.{key}", problems)
    return sweep


def config_from_dict(raw: Any, path: Optional[str] = None) -> ExperimentConfig:
    """Validate a decoded JSON document, reporting every problem at once."""
    problems: List[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a JSON object"], path)

    tiers = _parse_tiers(raw.get("tiers"), problems)
    constraints = _parse_constraints(raw.get("constraints"), problems)
    mode, strategy = _parse_strategy(raw, len(tiers), problems)

    iterations = raw.get("iterations", DEFAULT_ITERATIONS)
    if isinstance(iterations, bool) or not isinstance(iterations, int) or iterations < 1:
        problems.append(f"iterations: expected an integer >= 1, got {iterations!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed: expected a non-negative integer, got {seed!r}")

    horizons = raw.get("horizons", list(DEFAULT_HORIZONS))
    if not isinstance(horizons, list) or not all(isinstance(h, int) and h >= 2 for h in horizons):
        problems.append("horizons: expected a list of integers >= 2")
        horizons = list(DEFAULT_HORIZONS)

    budget = _parse_budget(raw.get("link_budget"), problems)
    flows = None
    if raw.get("flows") is not None:
        flow_raw = raw["flows"]
        angles = _parse_angle_list(
            flow_raw.get("dihedral_angles") if isinstance(flow_raw, dict) else None, "flows.dihedral_angles", problems
        )
        try:
            flows = FlowSpec(tuple(angles)) if angles else None
        except ValueError as exc:
            problems.append(f"flows: {exc}")
    metrics = _parse_metrics(raw.get("metrics"), problems)
    sweep = _parse_sweep(raw.get("sweep"), problems)

    known = {"tiers", "constraints", "strategy", "strategy_mode", "iterations", "seed", "horizons",
             "link_budget", "flows", "metrics", "sweep", "description"}
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown field")

    if problems:
        raise ConfigError(problems, path)
    return ExperimentConfig(
        tiers=tiers,
        constraints=constraints,
        strategy_mode=mode,
        explicit_strategy=strategy,
        iterations=iterations,
        seed=seed,
        horizons=tuple(horizons),
        link_budget=budget,
        flows=flows,
        metrics=metrics,
        sweep=sweep,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate the JSON experiment file at *path*."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read file: {exc.strerror or exc}"], str(path)) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"], str(path)) from exc
    config = config_from_dict(raw, str(path))
    logger.debug("Loaded %s: %d tiers, mode %s", path, len(config.tiers), config.strategy_mode)
    return config


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    c = config.constraints
    data: Dict[str, Any] = {
        "tiers": [{"height": t.height, "count": t.count} for t in config.tiers],
        "constraints": {
            "theta_r": c.theta_r,
            "theta_s": c.theta_s,
            "d_th": "inf" if math.isinf(c.d_th) else c.d_th,
            "theta_m": c.theta_m,
        },
        "strategy_mode": config.strategy_mode,
        "iterations": config.iterations,
        "seed": config.seed,
        "horizons": list(config.horizons),
        "metrics": {
            "gamma_db": list(config.metrics.gamma_db),
            "tau": list(config.metrics.tau),
            "dihedral_angles": list(config.metrics.dihedral_angles),
            "urllc_mode": config.metrics.urllc_mode,
            "flow_mode": config.metrics.flow_mode,
        },
    }
    if config.explicit_strategy is not None:
        data["strategy"] = list(config.explicit_strategy.ranks)
    if config.link_budget is not None:
        data["link_budget"] = {
            key: getattr(config.link_budget, name) for name, key in _BUDGET_DUMP_KEYS.items()
        }
    if config.flows is not None:
        data["flows"] = {"dihedral_angles": list(config.flows.dihedral_angles)}
    if config.sweep is not None:
        data["sweep"] = dict(config.sweep)
    return data


def dump_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")


def apply_overrides(
    config: ExperimentConfig,
    iterations: Optional[int] = None,
    seed: Optional[int] = None,
    strategy: Optional[str] = None,
    horizons: Optional[List[int]] = None,
    flow_mode: Optional[str] = None,
    urllc_mode: Optional[str] = None,
) -> ExperimentConfig:
    """Command-line values take precedence over the file."""
    problems: List[str] = []
    changes: Dict[str, Any] = {}
    if iterations is not None:
        if iterations < 1:
            problems.append(f"--iterations: expected >= 1, got {iterations}")
        changes["iterations"] = iterations
    if seed is not None:
        if seed < 0:
            problems.append(f"--seed: expected >= 0, got {seed}")
        changes["seed"] = seed
    if strategy is not None:
        if strategy in STRATEGY_MODES and strategy != "explicit":
            changes.update(strategy_mode=strategy, explicit_strategy=None)
        else:
            try:
                parsed = PriorityStrategy.parse(strategy)
            except ValueError as exc:
                problems.append(f"--strategy: {exc}")
            else:
                if parsed.size != len(config.tiers):
                    problems.append(f"--strategy: ranks {len(config.tiers)} tiers expected, got {parsed.size}")
                changes.update(strategy_mode="explicit", explicit_strategy=parsed)
    if horizons is not None:
        if any(h < 2 for h in horizons):
            problems.append("--ne: horizons must be >= 2")
        changes["horizons"] = tuple(horizons)
    grid_changes: Dict[str, str] = {}
    if flow_mode is not None:
        if flow_mode not in FLOW_MODES:
            problems.append(f"--flow-mode: expected one of {', '.join(FLOW_MODES)}, got {flow_mode!r}")
        grid_changes["flow_mode"] = flow_mode
    if urllc_mode is not None:
        if urllc_mode not in URLLC_MODES:
            problems.append(f"--urllc-mode: expected one of {', '.join(URLLC_MODES)}, got {urllc_mode!r}")
        grid_changes["urllc_mode"] = urllc_mode
    if grid_changes:
        changes["metrics"] = replace(config.metrics, **grid_changes)
    if problems:
        raise ConfigError(problems)
    return replace(config, **changes)
