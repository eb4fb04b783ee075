"""Analysis pipeline: the closed-form chain from geometry to route reliability.

Ties together the stages (interruption matrix, strategy, transition
matrices, stationary distribution, hop statistics, multi-hop interruption)
into one call whose result carries every intermediate product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence

import numpy as np

from .analytic import (
    delivering_tiers,
    relay_interruption_matrix,
    single_hop_from_matrix,
    tier_interruption_matrix,
)
from .diagnosis import Diagnosis, diagnose, sparse_progress
from .errors import ConfigError, InfeasibleNetworkError
from .geometry import ConstraintSet, TierSpec, validate_tiers
from .markov import (
    HopStatistics,
    PriorityStrategy,
    StationaryDistribution,
    TransitionMatrices,
    hops_before_interruption,
    hops_for_success,
    interruption_curve,
    mean_forward_dome_angle,
    multihop_interruption,
    reachable_tiers,
    stationary_distribution,
    transition_matrices,
    weighted_single_hop,
)
from .strategy import density_inspired, single_hop_inspired, stationary_optimal

logger = logging.getLogger(__name__)

STRATEGY_MODES = ("explicit", "stationary_optimal", "single_hop", "density", "dynamic")
DEFAULT_HORIZONS = (4, 6, 8)


@dataclass
class AnalysisResult:
    """Every analytic product of one (tiers, constraints, strategy) triple.

    ``p_i`` is the interruption matrix of a specific relay (own tier
    ``N_i - 1``); ``relay_p_i`` is the typical-relay matrix that, with the
    geometric ``delivering`` mask, drives the chain.  ``p_s`` derives from
    ``relay_p_i``.
    """

    tiers: List[TierSpec]
    constraints: ConstraintSet
    strategy: PriorityStrategy
    p_i: np.ndarray
    relay_p_i: np.ndarray
    delivering: np.ndarray
    p_s: np.ndarray
    reachable: FrozenSet[int]
    matrices: TransitionMatrices
    stationary: StationaryDistribution
    hop_stats: HopStatistics
    multihop: float
    weighted_interruption: float
    cumulative: Dict[int, np.ndarray] = field(default_factory=dict)
    diagnoses: List[Diagnosis] = field(default_factory=list)


def resolve_strategy(
    mode: str,
    p_i: np.ndarray,
    tiers: Sequence[TierSpec],
    explicit: Optional[PriorityStrategy] = None,
    workers: int = 1,
) -> PriorityStrategy:
    """Concrete strategy for a configured strategy mode.

    ``dynamic`` routes re-plan per hop; its starting strategy is the
    stationary-optimal one.
    """
    if mode == "explicit":
        if explicit is None:
            raise ConfigError(["strategy_mode 'explicit' needs an explicit strategy"])
        if explicit.size != len(tiers):
            raise ConfigError([f"strategy {explicit} does not rank {len(tiers)} tiers"])
        return explicit
    if mode in ("stationary_optimal", "dynamic"):
        return stationary_optimal(p_i, workers=workers)
    if mode == "single_hop":
        return single_hop_inspired(list(single_hop_from_matrix(p_i)))
    if mode == "density":
        return density_inspired(tiers, reachable_tiers(p_i))
    raise ConfigError([f"unknown strategy mode {mode!r}; expected one of {', '.join(STRATEGY_MODES)}"])


def run_analysis(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: Optional[PriorityStrategy] = None,
    mode: str = "explicit",
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    workers: int = 1,
) -> AnalysisResult:
    """Run the full analytic chain.

    The stages are:
      1. **Interruption matrix** and single-hop vector
      2. **Strategy** resolution (explicit or generated)
      3. **Transition matrices** T1, T2 and T3
      4. **Stationary distribution** over the reachable tiers
      5. **Hop statistics** (mean hops before interruption, theta_bar, N_h)
      6. **Multi-hop interruption** and cumulative curves

    Raises:
        InfeasibleNetworkError: no tier is reachable; the error carries
            the diagnoses explaining why.
    """
    tiers = list(tiers)
    validate_tiers(tiers)
    logger.info("=== Analysis Start ===")
    logger.info("Tiers: %s", ", ".join(f"{t.count}@{t.height:g}km" for t in tiers))

    logger.info("Stage 1: Interruption matrix")
    p_i = tier_interruption_matrix(tiers, constraints)
    relay_p_i = relay_interruption_matrix(tiers, constraints)
    delivering = delivering_tiers(tiers, constraints)
    p_s = single_hop_from_matrix(relay_p_i)
    logger.info("  Single-hop interruption: %s", np.array2string(p_s, precision=4))

    reachable = reachable_tiers(relay_p_i)
    diagnoses = diagnose(relay_p_i, tiers, constraints)
    if not reachable:
        for d in diagnoses:
            logger.warning("  %s: %s", d.error_category, d.root_cause)
        raise InfeasibleNetworkError("no tier is reachable from the gateway tier", diagnoses)

    logger.info("Stage 2: Strategy")
    if strategy is None:
        strategy = resolve_strategy(mode, relay_p_i, tiers, workers=workers)
    elif strategy.size != len(tiers):
        raise ConfigError([f"strategy {strategy} does not rank {len(tiers)} tiers"])
    logger.info("  Strategy: %s", strategy)

    logger.info("Stage 3: Transition matrices")
    matrices = transition_matrices(strategy, relay_p_i, delivering)
    logger.debug("  T1:\n%s", matrices.t1)
    logger.debug("  T2:\n%s", matrices.t2)
    logger.debug("  T3:\n%s", matrices.t3)

    logger.info("Stage 4: Stationary distribution")
    stationary = stationary_distribution(matrices.t1, reachable)
    logger.info("  v = %s", np.array2string(stationary.weights, precision=4))

    logger.info("Stage 5: Hop statistics")
    mu = hops_before_interruption(matrices.t2, reachable)
    theta_bar = mean_forward_dome_angle(matrices.t1, stationary, tiers, constraints, reachable)
    n_h = hops_for_success(constraints.theta_m, theta_bar)
    if theta_bar <= constraints.theta_s:
        diagnoses.append(sparse_progress(tiers, constraints, n_h))
        logger.warning("  Forward progress floored at theta_s; N_h = %d is an upper bound", n_h)
    if n_h < 2:
        logger.warning("  N_h = %d is below the two-hop minimum; evaluating with 2 hops", n_h)
    hop_stats = HopStatistics(mu=mu, n_h=n_h, theta_bar=theta_bar)
    logger.info("  theta_bar = %.4f, N_h = %d", theta_bar, n_h)

    logger.info("Stage 6: Multi-hop interruption")
    multihop = multihop_interruption(matrices.t2, matrices.t3, max(n_h, 2))
    weighted = weighted_single_hop(stationary, p_s)
    cumulative = {
        n_e: interruption_curve(n_e, n_e, matrices.t2, matrices.t3)
        for n_e in sorted({int(h) for h in horizons if int(h) >= 2})
    }
    logger.info("  Multi-hop interruption = %.4f", multihop)
    logger.info("=== Analysis Complete ===")

    return AnalysisResult(
        tiers=tiers,
        constraints=constraints,
        strategy=strategy,
        p_i=p_i,
        relay_p_i=relay_p_i,
        delivering=delivering,
        p_s=p_s,
        reachable=reachable,
        matrices=matrices,
        stationary=stationary,
        hop_stats=hop_stats,
        multihop=multihop,
        weighted_interruption=weighted,
        cumulative=cumulative,
        diagnoses=diagnoses,
    )
