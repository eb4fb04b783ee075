"""Monte Carlo verification of route reliability.

Each trial draws a fresh binomial point process on every tier and routes
hop by hop from a gateway at the north pole to a gateway ``theta_m`` away
along the prime meridian: the relay closest to the receiver is chosen from
the first tier, in priority order, holding a feasible candidate.  Within two
mean hops of the receiver only tiers that can reach the ground are searched,
so a route that finds none there is interrupted at its last hop.

Trials are independent.  Trial ``t`` draws from the substream
``SeedSequence(seed, spawn_key=(t,))``, and chunk results are merged as
integer tallies, so an estimate does not depend on the worker count.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analytic import delivering_tiers, relay_interruption_matrix
from .errors import InfeasibleNetworkError, SearchBudgetError
from .geometry import (
    EARTH_RADIUS_KM,
    ConstraintSet,
    TierSpec,
    feasible_mask,
    flow_arc_factor,
    link_dome_limit,
    max_dome_matrix,
    sample_sphere_array,
    validate_tiers,
)
from .markov import (
    GATEWAY_TIER,
    PriorityStrategy,
    all_strategies,
    build_t1,
    mean_forward_dome_angle,
    reachable_tiers,
    route_hop_limit,
    stationary_distribution,
)
from .strategy import MAX_EXHAUSTIVE_TIERS, dynamic_priority, penultimate_adjust

logger = logging.getLogger(__name__)

# Below this cross-product norm the receiver is treated as antipodal.
ANTIPODAL_TOL = 1e-9


class Outcome(enum.Enum):
    SUCCESS = "success"
    INTERRUPTED = "interrupted"


@dataclass
class RouteTrace:
    """One simulated route.

    ``tier_sequence`` starts with the transmitter's tier and lists the tier
    of every device that transmitted.  ``hops`` counts relay selections, the
    failed one included; the delivering link always succeeds and is not
    counted.
    """

    outcome: Outcome
    tier_sequence: List[int]
    interrupted_at: Optional[int] = None
    hop_distances: List[float] = field(default_factory=list)
    path: Optional[List[np.ndarray]] = None

    @property
    def hops(self) -> int:
        if self.success:
            return len(self.tier_sequence) - 1
        return len(self.tier_sequence)

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS


@dataclass
class SimulationEstimate:
    """Aggregate of many routes."""

    interruption_probability: float
    standard_error: float
    mean_hops_success: float
    hop_histogram: Dict[int, int]
    per_hop_interruptions: np.ndarray
    per_hop_reached: np.ndarray
    success_histogram: Dict[int, int] = field(default_factory=dict)
    iterations: int = 0

    @property
    def per_hop_interruption_rates(self) -> np.ndarray:
        """Probability of interruption at hop ``h`` given the route reached it."""
        reached = np.where(self.per_hop_reached > 0, self.per_hop_reached, 1)
        return self.per_hop_interruptions / reached


@dataclass
class RoutePlan:
    """Per-configuration quantities shared by every trial."""

    strategy: PriorityStrategy
    p_i: np.ndarray
    theta_max: np.ndarray
    delivery_limit: np.ndarray
    delivering: np.ndarray
    theta_bar: float
    dynamic: bool = False
    max_hops: int = 256
    _cache: Dict[Tuple[int, int], PriorityStrategy] = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        tiers: Sequence[TierSpec],
        constraints: ConstraintSet,
        strategy: PriorityStrategy,
        dynamic: bool = False,
    ) -> "RoutePlan":
        validate_tiers(tiers)
        if strategy.size != len(tiers):
            raise ValueError(f"strategy {strategy} does not rank {len(tiers)} tiers")
        p_i = relay_interruption_matrix(tiers, constraints)
        try:
            reachable = reachable_tiers(p_i)
            t1 = build_t1(strategy, p_i)
            v = stationary_distribution(t1, reachable)
            theta_bar = mean_forward_dome_angle(t1, v, tiers, constraints, reachable)
        except InfeasibleNetworkError:
            theta_bar = 0.0
        delivery = np.array(
            [link_dome_limit(t.radius, EARTH_RADIUS_KM, constraints.d_th) for t in tiers]
        )
        return cls(
            strategy=strategy,
            p_i=p_i,
            theta_max=max_dome_matrix(tiers, constraints),
            delivery_limit=delivery,
            delivering=delivering_tiers(tiers, constraints),
            theta_bar=theta_bar,
            dynamic=dynamic,
            max_hops=route_hop_limit(constraints),
        )

    def is_penultimate(self, remaining_angle: float) -> bool:
        return self.theta_bar > 0.0 and remaining_angle <= 2.0 * self.theta_bar

    def ranks_for(self, tier: int, remaining_angle: float) -> PriorityStrategy:
        """Priority order for the next hop from *tier*."""
        if self.theta_bar <= 0.0:
            return self.strategy
        if self.dynamic:
            hops = max(int(math.floor(remaining_angle / self.theta_bar + 0.5)), 1)
            key = (tier, hops)
            if key not in self._cache:
                self._cache[key] = dynamic_priority(tier, hops, self.p_i, self.delivering)
            return self._cache[key]
        if self.is_penultimate(remaining_angle):
            key = (-1, 0)
            if key not in self._cache:
                self._cache[key] = penultimate_adjust(self.strategy, self.p_i, self.delivering)
            return self._cache[key]
        return self.strategy

    def search_order(self, tier: int, remaining_angle: float) -> List[int]:
        """Tiers searched for the next hop from *tier*, highest priority first.

        Near the receiver the next relay must be able to deliver, so tiers
        that cannot reach the ground are left out.
        """
        order = self.ranks_for(tier, remaining_angle).order()
        if self.is_penultimate(remaining_angle):
            return [t for t in order if self.delivering[t]]
        return order


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _draw_tiers(tiers: Sequence[TierSpec], rng: np.random.Generator) -> List[np.ndarray]:
    # The transmitter is one of the gateways, so one fewer is drawn there.
    points = []
    for index, tier in enumerate(tiers):
        count = max(tier.count - 1, 0) if index == GATEWAY_TIER else tier.count
        points.append(sample_sphere_array(tier.radius, count, rng))
    return points


def _direction_reference(current: np.ndarray, receiver: np.ndarray, azimuth: float) -> np.ndarray:
    """Receiver direction, or the route's meridian heading when antipodal."""
    u_cur = current / np.linalg.norm(current)
    u_rx = receiver / np.linalg.norm(receiver)
    if np.linalg.norm(np.cross(u_cur, u_rx)) > ANTIPODAL_TOL:
        return receiver
    normal = np.array([-math.sin(azimuth), math.cos(azimuth), 0.0])
    heading = np.cross(normal, u_cur)
    if np.linalg.norm(heading) < ANTIPODAL_TOL:
        return receiver
    return heading


def run_route(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: PriorityStrategy,
    rng: np.random.Generator,
    plan: Optional[RoutePlan] = None,
    theta_m: Optional[float] = None,
    azimuth: float = 0.0,
    record_path: bool = False,
) -> RouteTrace:
    """Route one message over a fresh realisation of every tier.

    *theta_m* overrides the configured transmitter-receiver dome angle and
    *azimuth* rotates the route's meridian; both are used by multi-flow runs.
    """
    if plan is None:
        plan = RoutePlan.build(tiers, constraints, strategy)
    theta_m = constraints.theta_m if theta_m is None else theta_m
    r_1 = tiers[GATEWAY_TIER].radius
    transmitter = np.array([0.0, 0.0, r_1])
    receiver = r_1 * np.array(
        [math.sin(theta_m) * math.cos(azimuth), math.sin(theta_m) * math.sin(azimuth), math.cos(theta_m)]
    )
    u_rx = receiver / r_1
    points = _draw_tiers(tiers, rng)

    current, current_tier, current_index = transmitter, GATEWAY_TIER, -1
    sequence = [GATEWAY_TIER]
    distances: List[float] = []
    path = [transmitter] if record_path else None

    while True:
        remaining = float(np.arccos(np.clip(np.dot(current, u_rx) / np.linalg.norm(current), -1.0, 1.0)))
        if remaining <= plan.delivery_limit[current_tier]:
            distances.append(float(np.linalg.norm(receiver - current)))
            if path is not None:
                path.append(receiver)
            return RouteTrace(Outcome.SUCCESS, sequence, None, distances, path)
        if len(sequence) > plan.max_hops:
            logger.debug("Route exceeded %d hops, counted as interrupted", plan.max_hops)
            return RouteTrace(Outcome.INTERRUPTED, sequence, len(sequence), distances, path)

        reference = _direction_reference(current, receiver, azimuth)
        chosen = None
        for tier in plan.search_order(current_tier, remaining):
            candidates = points[tier]
            mask = feasible_mask(candidates, current, reference, constraints, plan.theta_max[current_tier, tier])
            if tier == current_tier and current_index >= 0:
                mask[current_index] = False
            if mask.any():
                closeness = np.where(mask, candidates @ u_rx / tiers[tier].radius, -np.inf)
                chosen = (tier, int(np.argmax(closeness)))
                break

        if chosen is None:
            return RouteTrace(Outcome.INTERRUPTED, sequence, len(sequence), distances, path)

        tier, index = chosen
        nxt = points[tier][index]
        distances.append(float(np.linalg.norm(nxt - current)))
        if path is not None:
            path.append(nxt)
        sequence.append(tier)
        current, current_tier, current_index = nxt, tier, index


@dataclass
class _Tally:
    interrupted: int = 0
    success: int = 0
    success_hops: int = 0
    hops: Counter = field(default_factory=Counter)
    success_hist: Counter = field(default_factory=Counter)
    interrupted_at: Counter = field(default_factory=Counter)

    def add(self, trace: RouteTrace) -> None:
        self.hops[trace.hops] += 1
        if trace.success:
            self.success += 1
            self.success_hops += trace.hops
            self.success_hist[trace.hops] += 1
        else:
            self.interrupted += 1
            self.interrupted_at[trace.interrupted_at] += 1

    def merge(self, other: "_Tally") -> None:
        self.interrupted += other.interrupted
        self.success += other.success
        self.success_hops += other.success_hops
        self.hops.update(other.hops)
        self.success_hist.update(other.success_hist)
        self.interrupted_at.update(other.interrupted_at)


def _run_chunk(args) -> _Tally:
    tiers, constraints, plan, seed, start, stop = args
    tally = _Tally()
    for trial in range(start, stop):
        tally.add(run_route(tiers, constraints, plan.strategy, trial_rng(seed, trial), plan=plan))
    return tally


def _chunks(iterations: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(iterations / max(workers * 4, 1)))
    return [(start, min(start + size, iterations)) for start in range(0, iterations, size)]


def _map(function, tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            return pool.map(function, tasks)
    return [function(task) for task in tasks]


def _summarise(tally: _Tally, iterations: int) -> SimulationEstimate:
    p = tally.interrupted / iterations
    longest = max(tally.hops) if tally.hops else 0
    interruptions = np.zeros(longest, dtype=int)
    for hop, count in tally.interrupted_at.items():
        interruptions[hop - 1] += count
    # A route with h hops reached every hop 1..h.
    reached = np.zeros(longest, dtype=int)
    for hops, count in tally.hops.items():
        reached[:hops] += count
    return SimulationEstimate(
        interruption_probability=p,
        standard_error=math.sqrt(p * (1.0 - p) / iterations),
        mean_hops_success=tally.success_hops / tally.success if tally.success else float("nan"),
        hop_histogram=dict(sorted(tally.hops.items())),
        per_hop_interruptions=interruptions,
        per_hop_reached=reached,
        success_histogram=dict(sorted(tally.success_hist.items())),
        iterations=iterations,
    )


def estimate(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: PriorityStrategy,
    iterations: int,
    seed: int,
    workers: int = 1,
    dynamic: bool = False,
) -> SimulationEstimate:
    """Interruption probability and hop statistics over *iterations* routes."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    plan = RoutePlan.build(tiers, constraints, strategy, dynamic=dynamic)
    tasks = [(list(tiers), constraints, plan, seed, start, stop) for start, stop in _chunks(iterations, workers)]
    tally = _Tally()
    for part in _map(_run_chunk, tasks, workers):
        tally.merge(part)
    result = _summarise(tally, iterations)
    logger.info(
        "Simulated %s over %d trials: interruption %.4f +/- %.4f",
        strategy, iterations, result.interruption_probability, result.standard_error,
    )
    return result


def exhaustive_search(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    iterations: int,
    seed: int,
    workers: int = 1,
) -> List[Tuple[PriorityStrategy, SimulationEstimate]]:
    """Simulated estimate for every strategy, best first."""
    k = len(tiers)
    if k > MAX_EXHAUSTIVE_TIERS:
        raise SearchBudgetError(
            f"simulating all {math.factorial(k)} strategies of {k} tiers exceeds the "
            f"{MAX_EXHAUSTIVE_TIERS}-tier budget"
        )
    ranked = [(s, estimate(tiers, constraints, s, iterations, seed, workers)) for s in all_strategies(k)]
    ranked.sort(key=lambda pair: (pair[1].interruption_probability, pair[0].ranks))
    return ranked


@dataclass
class VoidFrequency:
    frequency: float
    standard_error: float
    trials: int


def void_frequency(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    i: int,
    j: int,
    trials: int,
    seed: int,
) -> VoidFrequency:
    """Empirical probability that a tier-*i* relay sees no feasible tier-*j* relay.

    The relay sits at the north pole of its shell and heads along the prime
    meridian; only tier *j* is searched.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    theta_max = max_dome_matrix(tiers, constraints)[i, j]
    current = np.array([0.0, 0.0, tiers[i].radius])
    reference = np.array([1.0, 0.0, 0.0])
    count = max(tiers[j].count - 1, 0) if i == j else tiers[j].count
    voids = 0
    for trial in range(trials):
        candidates = sample_sphere_array(tiers[j].radius, count, trial_rng(seed, trial))
        if not feasible_mask(candidates, current, reference, constraints, theta_max).any():
            voids += 1
    p = voids / trials
    return VoidFrequency(frequency=p, standard_error=math.sqrt(p * (1.0 - p) / trials), trials=trials)


@dataclass
class MultiflowEstimate:
    """Trials where every flow was interrupted, with per-flow rates."""

    interruption_probability: float
    standard_error: float
    flow_interruption: np.ndarray


def _run_multiflow_chunk(args) -> Tuple[int, np.ndarray]:
    tiers, constraints, plan, seed, angles, start, stop = args
    all_failed = 0
    per_flow = np.zeros(len(angles), dtype=int)
    for trial in range(start, stop):
        failed = 0
        for flow, (theta, azimuth) in enumerate(angles):
            trace = run_route(
                tiers, constraints, plan.strategy, trial_rng(seed, trial, flow),
                plan=plan, theta_m=theta, azimuth=azimuth,
            )
            if not trace.success:
                per_flow[flow] += 1
                failed += 1
        if failed == len(angles):
            all_failed += 1
    return all_failed, per_flow


def estimate_multiflow(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: PriorityStrategy,
    dihedral_angles: Sequence[float],
    iterations: int,
    seed: int,
    workers: int = 1,
    dynamic: bool = False,
) -> MultiflowEstimate:
    """Simulate independent flows; a trial fails only if every flow fails.

    A flow tilted by ``Theta`` is routed over its own realisation along a
    meridian rotated by ``Theta``, with its dome angle scaled by the
    flow's arc length (capped at pi).
    """
    if not dihedral_angles:
        raise ValueError("at least one flow is required")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    plan = RoutePlan.build(tiers, constraints, strategy, dynamic=dynamic)
    angles = [
        (min(constraints.theta_m * flow_arc_factor(theta, constraints.theta_m), math.pi), float(theta))
        for theta in dihedral_angles
    ]
    tasks = [
        (list(tiers), constraints, plan, seed, angles, start, stop)
        for start, stop in _chunks(iterations, workers)
    ]
    all_failed = 0
    per_flow = np.zeros(len(angles), dtype=int)
    for failed, flows in _map(_run_multiflow_chunk, tasks, workers):
        all_failed += failed
        per_flow += flows
    p = all_failed / iterations
    return MultiflowEstimate(
        interruption_probability=p,
        standard_error=math.sqrt(p * (1.0 - p) / iterations),
        flow_interruption=per_flow / iterations,
    )
