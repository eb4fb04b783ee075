"""Diagnosis of degenerate networks.

Given an interruption matrix that leaves the route with nowhere to go, this
module names the tiers responsible and suggests a configuration change,
so a failed analysis reports more than "no tier is reachable".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .analytic import delivering_tiers
from .geometry import ConstraintSet, TierSpec, link_dome_limit
from .markov import GATEWAY_TIER, dead_end_tiers, reachable_tiers


@dataclass
class Diagnosis:
    """One problem found in a tier configuration."""

    error_category: str
    root_cause: str
    suggestion: str
    tier: Optional[int] = None


def diagnose(p_i: np.ndarray, tiers: Sequence[TierSpec], constraints: ConstraintSet) -> List[Diagnosis]:
    """Explain why routes from the gateway tier cannot progress.

    Returns an empty list for a healthy network.  Tier numbers in messages
    are 1-based, matching the CSV reports.
    """
    p_i = np.asarray(p_i, dtype=float)
    found: List[Diagnosis] = []

    for tier, spec in enumerate(tiers):
        if spec.count == 0:
            found.append(Diagnosis(
                error_category="empty",
                root_cause=f"Tier {tier + 1} has no devices",
                suggestion="Give the tier a positive device count or remove it",
                tier=tier,
            ))

    for tier in sorted(dead_end_tiers(p_i)):
        found.append(Diagnosis(
            error_category="dead_end",
            root_cause=f"Relays in tier {tier + 1} cannot reach any tier",
            suggestion=_dead_end_suggestion(tier, tiers, constraints),
            tier=tier,
        ))

    if not reachable_tiers(p_i):
        found.append(Diagnosis(
            error_category="unreachable",
            root_cause="No tier is reachable from the gateway tier",
            suggestion="Add satellites within line of sight of the gateways or raise d_th",
            tier=GATEWAY_TIER,
        ))

    if not delivering_tiers(tiers, constraints).any():
        found.append(Diagnosis(
            error_category="undeliverable",
            root_cause="No tier can hand traffic back to the gateway tier",
            suggestion="Lower satellite heights or raise d_th so satellites reach the ground",
            tier=GATEWAY_TIER,
        ))

    return found


def sparse_progress(tiers: Sequence[TierSpec], constraints: ConstraintSet, n_h: int) -> Diagnosis:
    """Tiers too sparse for the expected forward progress to exceed ``theta_s``."""
    sparsest = min(range(len(tiers)), key=lambda tier: (tiers[tier].count, tier))
    return Diagnosis(
        error_category="sparse",
        root_cause=(
            f"Expected forward progress per hop is no more than theta_s = {constraints.theta_s:.4g}; "
            f"N_h = {n_h} is an upper bound"
        ),
        suggestion="Add devices, most of all to the sparsest tiers",
        tier=sparsest,
    )


def _dead_end_suggestion(tier: int, tiers: Sequence[TierSpec], constraints: ConstraintSet) -> str:
    radius = tiers[tier].radius
    reachable_somewhere = any(
        link_dome_limit(radius, other.radius, constraints.d_th) > constraints.theta_s
        for other in tiers
    )
    if not reachable_somewhere:
        if math.isinf(constraints.d_th):
            return "Decrease theta_s; line of sight is shorter than the minimum hop"
        return "Raise d_th or decrease theta_s so some tier lies inside the hop ring"
    return "Add devices to the tiers within range of this one"
