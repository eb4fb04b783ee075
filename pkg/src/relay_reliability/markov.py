"""Multi-hop machinery: transition matrices over tiers and absorbing chains.

A priority strategy and the interruption matrix determine three transition
probability matrices (TPMs):

* ``t1``: ``K x K`` tier-to-tier TPM, rows normalised over successful hops;
* ``t2``: ``(K+1) x (K+1)`` augmented TPM whose last state absorbs
  interrupted routes;
* ``t3``: like ``t2`` but for the hop before delivery, where relays in tiers
  that cannot reach the gateway tier are useless.

From these follow the stationary tier occupancy, expected hops before
interruption, the expected forward progress per hop, and the multi-hop
interruption probability.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DomainError, InfeasibleNetworkError, NonAbsorbingChainError
from .geometry import ConstraintSet, TierSpec, max_dome_angle
from .analytic import GATEWAY_TIER, search_exponent, single_hop_from_matrix

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Priority strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorityStrategy:
    """Rank of every tier; rank 1 is searched first."""

    ranks: Tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        if sorted(ranks) != list(range(1, len(ranks) + 1)):
            raise ValueError(f"priority strategy must be a permutation of 1..K, got {list(ranks)}")

    @property
    def size(self) -> int:
        return len(self.ranks)

    def order(self) -> List[int]:
        """Tier indices from highest to lowest priority."""
        return sorted(range(self.size), key=lambda tier: self.ranks[tier])

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "PriorityStrategy":
        ranks = [0] * len(order)
        for rank, tier in enumerate(order, 1):
            ranks[tier] = rank
        return cls(tuple(ranks))

    @classmethod
    def parse(cls, text: str) -> "PriorityStrategy":
        """Parse ``"3,2,1"`` or ``"[3 2 1]"``."""
        tokens = text.replace("[", " ").replace("]", " ").replace(",", " ").split()
        return cls(tuple(int(token) for token in tokens))

    def __str__(self) -> str:
        return "[" + " ".join(str(r) for r in self.ranks) + "]"


def all_strategies(k: int) -> Iterator[PriorityStrategy]:
    """Every strategy for *k* tiers, in lexicographic order of rank vectors."""
    for ranks in itertools.permutations(range(1, k + 1)):
        yield PriorityStrategy(ranks)


# ---------------------------------------------------------------------------
# TPM operators
# ---------------------------------------------------------------------------

def _check_inputs(s: PriorityStrategy, p_i: np.ndarray) -> np.ndarray:
    p_i = np.asarray(p_i, dtype=float)
    if p_i.ndim != 2 or p_i.shape[0] != p_i.shape[1]:
        raise ValueError(f"interruption matrix must be square, got shape {p_i.shape}")
    if p_i.shape[0] != s.size:
        raise ValueError(f"strategy has {s.size} tiers but the matrix has {p_i.shape[0]}")
    if np.any(p_i < 0.0) or np.any(p_i > 1.0):
        raise ValueError("interruption probabilities must lie in [0, 1]")
    return p_i


def _selection_products(s: PriorityStrategy, p_i: np.ndarray, delivering: Optional[np.ndarray] = None) -> np.ndarray:
    """Probability that tier ``j`` is the first tier with an admissible relay.

    With *delivering* given, tiers outside the mask are neither selected nor
    searched ahead of anything else.
    """
    k = s.size
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if delivering is not None and not delivering[j]:
                continue
            value = 1.0 - p_i[i, j]
            for other in range(k):
                if s.ranks[j] > s.ranks[other] and (delivering is None or delivering[other]):
                    value *= p_i[i, other]
            out[i, j] = value
    return out


def dead_end_tiers(p_i: np.ndarray) -> FrozenSet[int]:
    """Tiers whose relays can never find a next hop (``P^S_i = 1``)."""
    p_s = single_hop_from_matrix(p_i)
    return frozenset(int(i) for i in np.flatnonzero(p_s == 1.0))


def build_t1(s: PriorityStrategy, p_i: np.ndarray) -> np.ndarray:
    """Tier-to-tier TPM; rows of dead-end tiers are left at zero."""
    p_i = _check_inputs(s, p_i)
    p_s = single_hop_from_matrix(p_i)
    products = _selection_products(s, p_i)
    t1 = np.zeros_like(products)
    live = p_s < 1.0
    t1[live] = products[live] / (1.0 - p_s[live])[:, None]
    if not np.all(live):
        logger.debug("Dead-end tiers (zero rows): %s", np.flatnonzero(~live).tolist())
    return t1


def _augment(interior: np.ndarray, absorbing_column: np.ndarray) -> np.ndarray:
    k = interior.shape[0]
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = interior
    out[:k, k] = absorbing_column
    out[k, k] = 1.0
    return out


def build_t2(s: PriorityStrategy, p_i: np.ndarray) -> np.ndarray:
    """Augmented TPM with the interruption state appended last."""
    p_i = _check_inputs(s, p_i)
    return _augment(_selection_products(s, p_i), single_hop_from_matrix(p_i))


def build_t3(s: PriorityStrategy, p_i: np.ndarray, delivering: Optional[np.ndarray] = None) -> np.ndarray:
    """Augmented TPM for the hop before delivery.

    Transitions into tiers that cannot deliver are dropped and their mass
    joins the interruption state.  Without *delivering* those are the tiers
    ``j`` with ``P^I_{j,1} = 1``.
    """
    p_i = _check_inputs(s, p_i)
    if delivering is None:
        delivering = p_i[:, GATEWAY_TIER] != 1.0
    delivering = np.asarray(delivering, dtype=bool)
    interior = _selection_products(s, p_i, delivering)
    absorbing = np.clip(1.0 - interior.sum(axis=1), 0.0, 1.0)
    return _augment(interior, absorbing)


@dataclass
class TransitionMatrices:
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray


def transition_matrices(
    s: PriorityStrategy, p_i: np.ndarray, delivering: Optional[np.ndarray] = None
) -> TransitionMatrices:
    return TransitionMatrices(t1=build_t1(s, p_i), t2=build_t2(s, p_i), t3=build_t3(s, p_i, delivering))


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------

def _closure(adjacency: np.ndarray, start: int) -> FrozenSet[int]:
    """Nodes reachable from *start* by at least one edge."""
    seen = set()
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in np.flatnonzero(adjacency[node]):
            nxt = int(nxt)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(seen)


def reachable_tiers(p_i: np.ndarray) -> FrozenSet[int]:
    """Tiers a route from the gateway tier can visit and leave again.

    Edge ``i -> j`` exists iff ``P^I_{i,j} != 1``.  The gateway tier is
    included only when some path returns to it; dead-end tiers are excluded.
    """
    p_i = np.asarray(p_i, dtype=float)
    return _closure(p_i != 1.0, GATEWAY_TIER) - dead_end_tiers(p_i)


def route_states(p_i: np.ndarray) -> FrozenSet[int]:
    """Every tier a route from the gateway tier can occupy, start included."""
    p_i = np.asarray(p_i, dtype=float)
    return _closure(p_i != 1.0, GATEWAY_TIER) | {GATEWAY_TIER}


# ---------------------------------------------------------------------------
# Stationary distribution
# ---------------------------------------------------------------------------

@dataclass
class StationaryDistribution:
    """Long-run tier occupancy; zero on tiers outside the reachable set."""

    weights: np.ndarray

    def augmented(self) -> np.ndarray:
        """Weights with a zero appended for the interruption state."""
        return np.append(self.weights, 0.0)


def stationary_distribution(t1: np.ndarray, reachable: Optional[Iterable[int]] = None) -> StationaryDistribution:
    """Left fixed point of *t1*, solved directly on the reachable submatrix."""
    t1 = np.asarray(t1, dtype=float)
    k = t1.shape[0]
    if reachable is None:
        positive = t1 > 0.0
        reachable = _closure(positive, GATEWAY_TIER) - {i for i in range(k) if not positive[i].any()}
    states = sorted(reachable)
    if not states:
        raise InfeasibleNetworkError("no tier is reachable from the gateway tier")

    sub = t1[np.ix_(states, states)]
    row_sums = sub.sum(axis=1, keepdims=True)
    sub = sub / np.where(row_sums > 0.0, row_sums, 1.0)

    n = len(states)
    system = sub.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        x = scipy.linalg.solve(system, rhs)
    except scipy.linalg.LinAlgError:
        augmented = np.vstack([sub.T - np.eye(n), np.ones((1, n))])
        x = scipy.linalg.lstsq(augmented, np.append(np.zeros(n), 1.0))[0]
    x = np.clip(x, 0.0, None)
    x /= x.sum()

    weights = np.zeros(k)
    weights[states] = x
    return StationaryDistribution(weights=weights)


# ---------------------------------------------------------------------------
# Hop statistics
# ---------------------------------------------------------------------------

@dataclass
class HopStatistics:
    mu: np.ndarray
    n_h: int
    theta_bar: float


def hops_before_interruption(t2: np.ndarray, reachable: Iterable[int]) -> np.ndarray:
    """Expected hops until absorption from each tier; 0 outside *reachable*."""
    t2 = np.asarray(t2, dtype=float)
    k = t2.shape[0] - 1
    states = sorted(reachable)
    mu = np.zeros(k)
    if not states:
        return mu

    # Every transient state must be able to reach the interruption state.
    can_absorb = {i for i in states if t2[i, k] > 0.0}
    changed = True
    while changed:
        changed = False
        for i in states:
            if i not in can_absorb and any(t2[i, j] > 0.0 for j in can_absorb):
                can_absorb.add(i)
                changed = True
    stuck = sorted(set(states) - can_absorb)
    if stuck:
        raise NonAbsorbingChainError(f"tiers {[s + 1 for s in stuck]} never reach interruption")

    q = t2[np.ix_(states, states)]
    mu[states] = scipy.linalg.solve(np.eye(len(states)) - q, np.ones(len(states)))
    return mu


def wallis_product(n: int) -> float:
    """``prod_{k=1..n} (2k-1)/(2k)``, accumulated in log space."""
    if n <= 0:
        return 1.0
    k = np.arange(1, n + 1, dtype=float)
    return float(np.exp(np.sum(np.log1p(-0.5 / k))))


def forward_dome_angle(i: int, j: int, tiers: Sequence[TierSpec], constraints: ConstraintSet) -> float:
    """Expected forward dome angle of a hop from tier *i* to tier *j*.

    The nearest-device cap is measured on the gateway sphere, where the
    receiver lies, and the forward ring on the sphere of the sending relay,
    hence the ``(R_1 / R_i)^2`` factor.  Returns 0 when the expected cap
    exceeds the whole ring.
    """
    expected_cap = math.pi * wallis_product(search_exponent(i, j, tiers))
    ratio = (tiers[GATEWAY_TIER].radius / tiers[i].radius) ** 2
    scale = 2.0 * math.pi / constraints.theta_r * ratio
    argument = scale - scale * math.cos(expected_cap) + math.cos(max_dome_angle(i, j, tiers, constraints))
    return math.acos(min(max(argument, -1.0), 1.0))


def mean_forward_dome_angle(
    t1: np.ndarray,
    v: StationaryDistribution,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    reachable: Optional[Iterable[int]] = None,
) -> float:
    """Stationary average of the forward dome angle per hop.

    Every admissible hop spans at least ``theta_s``, so the average is
    floored there when sparse tiers make the expected caps cover their rings.
    """
    t1 = np.asarray(t1, dtype=float)
    weights = v.weights
    states = sorted(reachable) if reachable is not None else range(len(tiers))
    total = 0.0
    mass = 0.0
    for i in states:
        if weights[i] == 0.0:
            continue
        for j in states:
            if t1[i, j] > 0.0:
                mass += weights[i] * t1[i, j]
                total += weights[i] * t1[i, j] * forward_dome_angle(i, j, tiers, constraints)
    if mass > 0.0 and total < constraints.theta_s:
        logger.warning(
            "Mean forward dome angle %.4g is below theta_s; using theta_s = %.4g", total, constraints.theta_s
        )
        return constraints.theta_s
    return total


def hops_for_success(theta_m: float, theta_bar: float) -> int:
    """Expected hop count, ``theta_m / theta_bar`` rounded half up (min 1)."""
    if not theta_bar > 0.0:
        raise DomainError(f"mean forward dome angle must be positive, got {theta_bar}")
    return max(int(math.floor(theta_m / theta_bar + 0.5)), 1)


def route_hop_limit(constraints: ConstraintSet) -> int:
    """Relay selections after which a route that has not arrived counts as interrupted."""
    return max(256, 4 * math.ceil(math.pi / constraints.theta_s))


# ---------------------------------------------------------------------------
# Interruption probabilities
# ---------------------------------------------------------------------------

def _unit_row(size: int, index: int) -> np.ndarray:
    row = np.zeros(size)
    row[index] = 1.0
    return row


def _propagate(row: np.ndarray, matrix: np.ndarray, steps: int) -> np.ndarray:
    for _ in range(steps):
        row = row @ matrix
    return row


def multihop_interruption(t2: np.ndarray, t3: np.ndarray, n_h: int, start: int = GATEWAY_TIER) -> float:
    """Probability that a route of ``n_h`` hops from *start* is interrupted."""
    if n_h < 2:
        raise DomainError(f"multi-hop interruption needs at least 2 hops, got {n_h}")
    t2 = np.asarray(t2, dtype=float)
    row = _propagate(_unit_row(t2.shape[0], start), t2, n_h - 2) @ np.asarray(t3, dtype=float)
    return float(np.clip(row[-1], 0.0, 1.0))


def cumulative_interruption(n: int, n_e: int, t2: np.ndarray, t3: np.ndarray, start: int = GATEWAY_TIER) -> float:
    """Probability that interruption has occurred by hop *n* of an ``n_e``-hop route."""
    if n < 0:
        raise DomainError(f"hop index must be >= 0, got {n}")
    if n_e < 2:
        raise DomainError(f"route horizon must be at least 2 hops, got {n_e}")
    if n >= n_e - 1:
        return multihop_interruption(t2, t3, n_e, start)
    t2 = np.asarray(t2, dtype=float)
    return float(np.clip(_propagate(_unit_row(t2.shape[0], start), t2, n)[-1], 0.0, 1.0))


def interruption_curve(n_max: int, n_e: int, t2: np.ndarray, t3: np.ndarray) -> np.ndarray:
    """``cumulative_interruption(n, n_e)`` for ``n = 0..n_max``."""
    t2 = np.asarray(t2, dtype=float)
    curve = np.empty(n_max + 1)
    row = _unit_row(t2.shape[0], GATEWAY_TIER)
    final = multihop_interruption(t2, t3, n_e)
    for n in range(n_max + 1):
        if n >= n_e - 1:
            curve[n] = final
        else:
            curve[n] = min(max(row[-1], 0.0), 1.0)
            row = row @ t2
    return curve


def weighted_single_hop(v: StationaryDistribution, p_s: np.ndarray) -> float:
    """Stationary-weighted single-hop interruption probability."""
    return float(np.dot(v.weights, np.asarray(p_s, dtype=float)))
