"""Priority-strategy generation and search.

The stationary-optimal search enumerates all ``K!`` strategies and keeps the
one whose stationary-weighted single-hop interruption is smallest.  Two
cheap alternatives rank tiers by single-hop interruption or by device
density.  The penultimate adjustment and per-hop dynamic priorities adapt a
strategy to the end of the route.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .analytic import delivering_tiers
from .errors import InfeasibleNetworkError, NoFeasibleStrategyError, SearchBudgetError
from .geometry import ConstraintSet, TierSpec
from .markov import (
    GATEWAY_TIER,
    PriorityStrategy,
    StationaryDistribution,
    all_strategies,
    build_t1,
    build_t2,
    build_t3,
    hops_for_success,
    mean_forward_dome_angle,
    multihop_interruption,
    reachable_tiers,
    stationary_distribution,
)

logger = logging.getLogger(__name__)

# Largest K for which all K! strategies are enumerated.
MAX_EXHAUSTIVE_TIERS = 8


@dataclass
class StrategyReport:
    """Analytic summary of one strategy (one row of the strategy table)."""

    strategy: PriorityStrategy
    stationary: StationaryDistribution
    weighted_interruption: float
    analytic_multihop: float
    w: Optional[np.ndarray] = None


def _delivering_mask(p_i: np.ndarray, delivering: Optional[np.ndarray]) -> np.ndarray:
    if delivering is None:
        return p_i[:, GATEWAY_TIER] != 1.0
    return np.asarray(delivering, dtype=bool)


def _check_budget(k: int) -> None:
    if k > MAX_EXHAUSTIVE_TIERS:
        raise SearchBudgetError(
            f"{k} tiers means {math.factorial(k)} strategies; "
            f"exhaustive search is limited to {MAX_EXHAUSTIVE_TIERS} tiers, pick a heuristic strategy"
        )


def weighted_interruption_of(s: PriorityStrategy, p_i: np.ndarray) -> Tuple[float, StationaryDistribution, np.ndarray]:
    """Last entry of ``w = (v, 0) . T2`` for strategy *s*, with ``v`` and ``w``."""
    t1 = build_t1(s, p_i)
    v = stationary_distribution(t1, reachable_tiers(p_i))
    w = v.augmented() @ build_t2(s, p_i)
    return float(w[-1]), v, w


def stationary_optimal(p_i: np.ndarray, workers: int = 1) -> PriorityStrategy:
    """Strategy minimising the stationary-weighted single-hop interruption.

    Ties go to the lexicographically smallest rank vector.  With
    ``workers > 1`` candidates are scored concurrently; the reduction does
    not depend on completion order.
    """
    p_i = np.asarray(p_i, dtype=float)
    k = p_i.shape[0]
    _check_budget(k)
    if not reachable_tiers(p_i):
        raise NoFeasibleStrategyError("no strategy reaches any tier from the gateway tier")

    candidates = list(all_strategies(k))

    def score(s: PriorityStrategy) -> Tuple[float, Tuple[int, ...]]:
        return weighted_interruption_of(s, p_i)[0], s.ranks

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(score, candidates))
    else:
        scored = [score(s) for s in candidates]

    best_value, best_ranks = min(scored)
    logger.debug("Stationary optimal strategy %s with weighted interruption %.6g", list(best_ranks), best_value)
    return PriorityStrategy(best_ranks)


def single_hop_inspired(p_s: Sequence[float]) -> PriorityStrategy:
    """Rank tiers by ascending single-hop interruption; ties by tier index."""
    order = sorted(range(len(p_s)), key=lambda tier: (p_s[tier], tier))
    return PriorityStrategy.from_order(order)


def density_inspired(
    tiers: Sequence[TierSpec], reachable: Iterable[int], demote_gateways: bool = True
) -> PriorityStrategy:
    """Densest reachable satellite tiers first; gateways and unreachable tiers last.

    The returned strategy holds ranks, not a tier order.  On the case study
    the densities order the tiers 3, 1, 2; with the gateway tier demoted
    the order is 3, 2, 1, which is also the rank vector ``[3 2 1]``.
    ``demote_gateways=False`` keeps the gateway tier at its density
    position, giving the order 3, 1, 2 (ranks ``[2 3 1]``).
    """
    reachable = set(reachable)

    def demoted_tier(tier: int) -> bool:
        return tier not in reachable or (demote_gateways and tier == GATEWAY_TIER)

    preferred = [t for t in range(len(tiers)) if not demoted_tier(t)]
    demoted = [t for t in range(len(tiers)) if demoted_tier(t)]
    preferred.sort(key=lambda tier: (-tiers[tier].density, tier))
    demoted.sort(key=lambda tier: (tier == GATEWAY_TIER, tier))
    return PriorityStrategy.from_order(preferred + demoted)


def penultimate_adjust(
    s: PriorityStrategy, p_i: np.ndarray, delivering: Optional[np.ndarray] = None
) -> PriorityStrategy:
    """Demote tiers that cannot reach the gateway tier, keeping relative order."""
    mask = _delivering_mask(np.asarray(p_i, dtype=float), delivering)
    order = s.order()
    return PriorityStrategy.from_order([t for t in order if mask[t]] + [t for t in order if not mask[t]])


def remaining_route_interruption(
    s: PriorityStrategy,
    p_i: np.ndarray,
    current_tier: int,
    remaining_hops: int,
    delivering: Optional[np.ndarray] = None,
) -> float:
    """Interruption probability of the rest of a route started at *current_tier*."""
    t3 = build_t3(s, p_i, delivering)
    if remaining_hops <= 2:
        return float(t3[current_tier, -1])
    return multihop_interruption(build_t2(s, p_i), t3, remaining_hops, start=current_tier)


def dynamic_priority(
    current_tier: int, remaining_hops: int, p_i: np.ndarray, delivering: Optional[np.ndarray] = None
) -> PriorityStrategy:
    """Strategy minimising the interruption of the remaining route.

    With one hop left only the choice of a delivering relay matters, so
    tiers that reach the gateway tier are ranked by their void probability
    from the current tier.
    """
    if remaining_hops < 1:
        raise ValueError(f"remaining hops must be >= 1, got {remaining_hops}")
    p_i = np.asarray(p_i, dtype=float)
    k = p_i.shape[0]
    mask = _delivering_mask(p_i, delivering)
    if remaining_hops == 1:
        able = [t for t in range(k) if mask[t]]
        blocked = [t for t in range(k) if not mask[t]]
        able.sort(key=lambda tier: (p_i[current_tier, tier], tier))
        return PriorityStrategy.from_order(able + blocked)

    _check_budget(k)
    best = min(
        (remaining_route_interruption(s, p_i, current_tier, remaining_hops, mask), s.ranks)
        for s in all_strategies(k)
    )
    return PriorityStrategy(best[1])


def report_strategy(
    s: PriorityStrategy, p_i: np.ndarray, tiers: Sequence[TierSpec], constraints: ConstraintSet
) -> StrategyReport:
    """Stationary distribution, weighted interruption and multi-hop interruption of *s*.

    *p_i* is the typical-relay matrix; delivery follows the tier geometry.
    """
    weighted, v, w = weighted_interruption_of(s, p_i)
    theta_bar = mean_forward_dome_angle(build_t1(s, p_i), v, tiers, constraints, reachable_tiers(p_i))
    n_h = max(hops_for_success(constraints.theta_m, theta_bar), 2)
    delivering = delivering_tiers(tiers, constraints)
    multihop = multihop_interruption(build_t2(s, p_i), build_t3(s, p_i, delivering), n_h)
    return StrategyReport(strategy=s, stationary=v, weighted_interruption=weighted, analytic_multihop=multihop, w=w)


def strategy_reports(
    p_i: np.ndarray, tiers: Sequence[TierSpec], constraints: ConstraintSet
) -> List[StrategyReport]:
    """Reports for all ``K!`` strategies, sorted by weighted interruption."""
    p_i = np.asarray(p_i, dtype=float)
    _check_budget(p_i.shape[0])
    reports = []
    for s in all_strategies(p_i.shape[0]):
        try:
            reports.append(report_strategy(s, p_i, tiers, constraints))
        except InfeasibleNetworkError:
            logger.debug("Strategy %s has no reachable tiers, skipped", s)
    reports.sort(key=lambda r: (r.weighted_interruption, r.strategy.ranks))
    return reports
