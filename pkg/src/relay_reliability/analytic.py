"""Closed-form single-hop reliability.

The tier-to-tier interruption matrix gives, for a relay in tier ``i``, the
probability that no device of tier ``j`` lies in the admissible annular
sector; the single-hop vector multiplies those voids over all tiers.

Two views of a relay's own tier are supported.  A specific relay sees the
``N_i - 1`` other devices of its tier.  The transition matrices instead treat
the relay as a typical point added to its tier, which leaves all ``N_i``
devices as candidates.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from .geometry import ConstraintSet, TierSpec, max_dome_angle, sector_area_fraction

logger = logging.getLogger(__name__)

# Above this exponent the power is evaluated as exp(n * log1p(-a)).
LOG_SPACE_EXPONENT = 1000

# Index of the terrestrial tier holding the transmitter and the receiver.
GATEWAY_TIER = 0


def void_probability(area_fraction: float, exponent: int) -> float:
    """Probability that none of *exponent* uniform points hits the region."""
    exponent = max(int(exponent), 0)
    if area_fraction <= 0.0 or exponent == 0:
        return 1.0
    if area_fraction >= 1.0:
        return 0.0
    if exponent > LOG_SPACE_EXPONENT:
        value = math.exp(exponent * math.log1p(-area_fraction))
    else:
        value = (1.0 - area_fraction) ** exponent
    return min(max(value, 0.0), 1.0)


def search_exponent(i: int, j: int, tiers: Sequence[TierSpec], exclude_self: bool = True) -> int:
    """Number of candidate devices tier *i* searches in tier *j*."""
    count = tiers[j].count
    if i == j and exclude_self:
        return max(count - 1, 0)
    return count


def tier_interruption(
    i: int, j: int, tiers: Sequence[TierSpec], constraints: ConstraintSet, exclude_self: bool = True
) -> float:
    theta_ij = max_dome_angle(i, j, tiers, constraints)
    if theta_ij == constraints.theta_s:
        return 1.0
    area = sector_area_fraction(constraints.theta_r, constraints.theta_s, theta_ij)
    return void_probability(area, search_exponent(i, j, tiers, exclude_self))


def tier_interruption_matrix(
    tiers: Sequence[TierSpec], constraints: ConstraintSet, exclude_self: bool = True
) -> np.ndarray:
    """``K x K`` matrix of tier-to-tier interruption probabilities.

    Entry ``(i, j)`` is exactly 1.0 when the pair cannot communicate
    (maximum dome angle collapses to ``theta_s``) or tier ``j`` is empty.
    """
    k = len(tiers)
    p_i = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            p_i[i, j] = tier_interruption(i, j, tiers, constraints, exclude_self)
    logger.debug("Interruption matrix (exclude_self=%s):\n%s", exclude_self, p_i)
    return p_i


def relay_interruption_matrix(tiers: Sequence[TierSpec], constraints: ConstraintSet) -> np.ndarray:
    """Interruption matrix seen by a typical relay, the input of the route chain."""
    return tier_interruption_matrix(tiers, constraints, exclude_self=False)


def delivering_tiers(tiers: Sequence[TierSpec], constraints: ConstraintSet) -> np.ndarray:
    """Tiers whose devices can reach a point of the ground tier.

    Depends on geometry only, so an empty ground tier still receives.
    """
    return np.array([
        max_dome_angle(j, GATEWAY_TIER, tiers, constraints) > constraints.theta_s
        for j in range(len(tiers))
    ])


def single_hop_from_matrix(p_i: np.ndarray) -> np.ndarray:
    """Row-wise product of the interruption matrix (tiers are independent)."""
    return np.clip(np.prod(np.asarray(p_i, dtype=float), axis=1), 0.0, 1.0)


def single_hop_vector(tiers: Sequence[TierSpec], constraints: ConstraintSet, exclude_self: bool = True) -> np.ndarray:
    """Probability that a relay in each tier finds no relay in any tier."""
    return single_hop_from_matrix(tier_interruption_matrix(tiers, constraints, exclude_self))
