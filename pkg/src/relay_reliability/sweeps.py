"""Parameter sweeps producing long-format rows (one row per point per metric).

Every sweep evaluates the closed-form chain; sweeps that also accept
``iterations`` add simulated estimates for the same points.  The
nonuniformity and tier-count sweeps compare four strategies per point and
label each row with the strategy that produced it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .analytic import relay_interruption_matrix, single_hop_from_matrix
from .errors import DomainError, InfeasibleNetworkError, NoFeasibleStrategyError
from .geometry import ConstraintSet, TierSpec
from .link_metrics import (
    FadingSurvival,
    FlowSpec,
    LinkBudget,
    availability,
    combine_flows,
    coverage_probability,
    urllc_rate,
)
from .markov import PriorityStrategy, reachable_tiers
from .pipeline import run_analysis
from .simulator import estimate, estimate_multiflow, exhaustive_search
from .strategy import density_inspired, single_hop_inspired, stationary_optimal, strategy_reports

logger = logging.getLogger(__name__)

NONUNIFORM_HEIGHTS = (0.0, 300.0, 600.0, 900.0, 1200.0)
NONUNIFORM_BASE_COUNT = 300
TRADEOFF_TARGET = 0.1
TRADEOFF_TOL = 0.002
TRADEOFF_MAX_SATELLITES = 100_000
DEVICE_HEIGHTS = (0.0, 600.0, 900.0, 1200.0)
THREE_FLOWS = FlowSpec((0.0, math.pi / 6, math.pi / 6))
COMPARED_STRATEGIES = ("exhaustive", "stationary_optimal", "single_hop", "density")


@dataclass
class SweepRow:
    sweep: str
    point: int
    x_name: str
    x: float
    metric: str
    value: float
    y_name: str = ""
    y: Optional[float] = None
    strategy: str = ""


def _analytic_multihop(tiers: Sequence[TierSpec], constraints: ConstraintSet) -> float:
    """Stationary-optimal multi-hop interruption; 1.0 when nothing is reachable."""
    try:
        return run_analysis(tiers, constraints, mode="stationary_optimal").multihop
    except (InfeasibleNetworkError, NoFeasibleStrategyError):
        logger.warning("No reachable tier for %s; interruption taken as 1", [t.count for t in tiers])
        return 1.0


def compared_strategies(
    tiers: Sequence[TierSpec], constraints: ConstraintSet, workers: int = 1
) -> Dict[str, Tuple[PriorityStrategy, float]]:
    """Strategy and analytic multi-hop interruption for each of ``COMPARED_STRATEGIES``.

    ``exhaustive`` is the strategy with the lowest multi-hop interruption
    over all ``K!`` candidates.  Empty when no tier is reachable.
    """
    p_i = relay_interruption_matrix(tiers, constraints)
    reachable = reachable_tiers(p_i)
    if not reachable:
        return {}
    reports = {r.strategy.ranks: r.analytic_multihop for r in strategy_reports(p_i, tiers, constraints)}
    if not reports:
        return {}
    best = min(reports, key=lambda ranks: (reports[ranks], ranks))
    chosen = {
        "exhaustive": PriorityStrategy(best),
        "stationary_optimal": stationary_optimal(p_i, workers=workers),
        "single_hop": single_hop_inspired(list(single_hop_from_matrix(p_i))),
        "density": density_inspired(tiers, reachable),
    }
    return {name: (s, reports.get(s.ranks, 1.0)) for name, s in chosen.items()}


def _strategy_rows(
    sweep: str,
    point: int,
    x_name: str,
    x: float,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    iterations: int,
    seed: int,
    workers: int,
) -> List[SweepRow]:
    compared = compared_strategies(tiers, constraints, workers)
    if not compared:
        logger.warning("No reachable tier for %s; interruption taken as 1", [t.count for t in tiers])
        fallback = PriorityStrategy(tuple(range(1, len(tiers) + 1)))
        compared = {name: (fallback, 1.0) for name in COMPARED_STRATEGIES}
    rows = []
    for name in COMPARED_STRATEGIES:
        strategy, analytic = compared[name]
        rows.append(SweepRow(sweep, point, x_name, x, "analytic", analytic, strategy=name))
        if not iterations:
            continue
        if name == "exhaustive":
            simulated = exhaustive_search(tiers, constraints, iterations, seed, workers)[0][1]
        else:
            simulated = estimate(tiers, constraints, strategy, iterations, seed, workers)
        rows.append(SweepRow(sweep, point, x_name, x, "simulated", simulated.interruption_probability, strategy=name))
    return rows


def nonuniformity_tiers(alpha: float) -> List[TierSpec]:
    """Five tiers whose counts tilt linearly with height by *alpha*."""
    scales = (1 - 2 * alpha, 1 - alpha, 1.0, 1 + alpha, 1 + 2 * alpha)
    return [
        TierSpec.at_height(height, int(round(scale * NONUNIFORM_BASE_COUNT)))
        for height, scale in zip(NONUNIFORM_HEIGHTS, scales)
    ]


def sweep_nonuniformity(
    constraints: ConstraintSet,
    alphas: Iterable[float] = tuple(np.linspace(-0.5, 0.5, 11)),
    iterations: int = 0,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepRow]:
    """Positive *alpha* puts more devices in the upper tiers."""
    rows = []
    for point, alpha in enumerate(alphas):
        tiers = nonuniformity_tiers(float(alpha))
        rows += _strategy_rows("nonuniformity", point, "alpha", float(alpha), tiers, constraints,
                               iterations, seed, workers)
    return rows


def equal_split_tiers(k: int, total: int, low: float = 300.0, high: float = 1200.0) -> List[TierSpec]:
    """Gateway tier plus ``k - 1`` satellite tiers between *low* and *high*."""
    base, extra = divmod(total, k)
    counts = [base + (1 if index < extra else 0) for index in range(k)]
    heights = [0.0] + list(np.linspace(low, high, k + 1)[1:-1])
    return [TierSpec.at_height(h, c) for h, c in zip(heights, counts)]


def sweep_tiers(
    constraints: ConstraintSet,
    tier_counts: Iterable[int] = range(2, 7),
    total: int = 1500,
    iterations: int = 0,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepRow]:
    rows = []
    for point, k in enumerate(tier_counts):
        tiers = equal_split_tiers(int(k), total)
        rows += _strategy_rows("tiers", point, "tiers", int(k), tiers, constraints, iterations, seed, workers)
    return rows


def sweep_height_count(
    constraints: ConstraintSet,
    heights: Iterable[float] = (300.0, 600.0, 900.0, 1200.0),
    counts: Iterable[int] = (100, 200, 400, 800, 1600),
    gateways: int = 500,
) -> List[SweepRow]:
    """One satellite tier above *gateways* terrestrial relays."""
    rows = []
    point = 0
    for height in heights:
        for count in counts:
            tiers = [TierSpec.at_height(0.0, gateways), TierSpec.at_height(height, int(count))]
            rows.append(SweepRow("height_count", point, "height_km", float(height), "analytic",
                                 _analytic_multihop(tiers, constraints), "satellites", float(count)))
            point += 1
    return rows


def satellites_for_target(
    gateways: int,
    height: float,
    constraints: ConstraintSet,
    target: float = TRADEOFF_TARGET,
    tol: float = TRADEOFF_TOL,
    evaluate: Optional[Callable[[List[TierSpec]], float]] = None,
) -> Optional[int]:
    """Smallest satellite count whose interruption is within *tol* of *target*.

    Interruption is assumed non-increasing in the satellite count.  Returns
    ``None`` when even ``TRADEOFF_MAX_SATELLITES`` satellites miss the target.
    """
    evaluate = evaluate or (lambda tiers: _analytic_multihop(tiers, constraints))

    def value(n: int) -> float:
        return evaluate([TierSpec.at_height(0.0, gateways), TierSpec.at_height(height, n)])

    lo, hi = 0, 1
    while value(hi) > target + tol:
        lo, hi = hi, hi * 2
        if hi > TRADEOFF_MAX_SATELLITES:
            return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        current = value(mid)
        if abs(current - target) <= tol:
            return mid
        if current > target:
            lo = mid
        else:
            hi = mid
    return hi


def sweep_tradeoff(
    constraints: ConstraintSet,
    gateway_counts: Iterable[int] = (100, 200, 300, 400, 500),
    height: float = 1200.0,
    target: float = TRADEOFF_TARGET,
) -> List[SweepRow]:
    rows = []
    for point, gateways in enumerate(gateway_counts):
        needed = satellites_for_target(int(gateways), height, constraints, target)
        rows.append(SweepRow("tradeoff", point, "gateways", float(gateways), "satellites",
                             float("nan") if needed is None else float(needed)))
    return rows


def sweep_devices(
    constraints: ConstraintSet,
    budget: LinkBudget,
    totals: Iterable[int] = (400, 800, 1200, 1600, 2000, 2400),
    gamma: Optional[float] = None,
    tau: Optional[float] = None,
    urllc_mode: str = "dimensional",
) -> List[SweepRow]:
    """Availability, coverage and URLLC rate of four equal tiers."""
    gamma = budget.snr_threshold if gamma is None else gamma
    tau = budget.latency_threshold if tau is None else tau
    survival = FadingSurvival(budget)
    rows = []
    for point, total in enumerate(totals):
        tiers = [TierSpec.at_height(h, int(total) // len(DEVICE_HEIGHTS)) for h in DEVICE_HEIGHTS]
        metrics: Dict[str, float] = {"availability": availability(tiers, constraints, None)}
        try:
            result = run_analysis(tiers, constraints, mode="stationary_optimal")
        except (InfeasibleNetworkError, NoFeasibleStrategyError, DomainError) as exc:
            logger.warning("No route analysis for %d devices (%s); coverage taken as 0", total, exc)
            metrics.update(coverage=0.0, urllc=0.0)
        else:
            metrics["coverage"] = coverage_probability(gamma, tiers, constraints, result.strategy, budget, result, survival)
            metrics["urllc"] = urllc_rate(gamma, tau, tiers, constraints, result.strategy, budget,
                                          urllc_mode, result, survival)
        for name, value in metrics.items():
            rows.append(SweepRow("devices", point, "devices", float(total), name, value))
    return rows


def sweep_theta_m(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    thetas: Iterable[float] = tuple(np.linspace(math.pi / 6, math.pi, 6)),
    flows: FlowSpec = THREE_FLOWS,
    iterations: int = 0,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepRow]:
    """Single-flow, multi-flow and dynamic routing against the end-to-end dome angle."""
    rows = []
    for point, theta in enumerate(thetas):
        theta = float(theta)
        scoped = ConstraintSet(constraints.theta_r, constraints.theta_s, constraints.d_th, theta)
        try:
            result = run_analysis(tiers, scoped, mode="stationary_optimal")
        except (InfeasibleNetworkError, NoFeasibleStrategyError):
            rows.append(SweepRow("theta_m", point, "theta_m", theta, "single_flow", 1.0))
            continue
        rows.append(SweepRow("theta_m", point, "theta_m", theta, "single_flow", result.multihop))
        rows.append(SweepRow("theta_m", point, "theta_m", theta, "multi_flow", combine_flows(flows, result.multihop, theta)))
        if iterations:
            single = estimate(tiers, scoped, result.strategy, iterations, seed, workers)
            dynamic = estimate(tiers, scoped, result.strategy, iterations, seed, workers, dynamic=True)
            multi = estimate_multiflow(tiers, scoped, result.strategy, flows.dihedral_angles, iterations, seed, workers)
            rows.append(SweepRow("theta_m", point, "theta_m", theta, "single_flow_simulated", single.interruption_probability))
            rows.append(SweepRow("theta_m", point, "theta_m", theta, "dynamic_simulated", dynamic.interruption_probability))
            rows.append(SweepRow("theta_m", point, "theta_m", theta, "multi_flow_simulated", multi.interruption_probability))
    return rows


def run_sweep(
    spec: Dict[str, Any],
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    budget: Optional[LinkBudget] = None,
    seed: int = 0,
    workers: int = 1,
) -> List[SweepRow]:
    """Dispatch a ``{"kind": ..., **parameters}`` sweep description."""
    params = {key: value for key, value in spec.items() if key != "kind"}
    kind = spec["kind"]
    logger.info("Running %s sweep with %s", kind, params or "defaults")
    if kind == "nonuniformity":
        return sweep_nonuniformity(constraints, seed=seed, workers=workers, **params)
    if kind == "tiers":
        return sweep_tiers(constraints, seed=seed, workers=workers, **params)
    if kind == "height_count":
        return sweep_height_count(constraints, **params)
    if kind == "tradeoff":
        return sweep_tradeoff(constraints, **params)
    if kind == "devices":
        return sweep_devices(constraints, budget or LinkBudget(), **params)
    if kind == "theta_m":
        if "dihedral_angles" in params:
            params["flows"] = FlowSpec(tuple(params.pop("dihedral_angles")))
        return sweep_theta_m(tiers, constraints, seed=seed, workers=workers, **params)
    raise ValueError(f"unknown sweep kind {kind!r}")
