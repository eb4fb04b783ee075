"""Link-level metrics on top of route reliability.

Satellite availability (joint line of sight only), SNR coverage under
free-space loss with Shadowed-Rician fading on satellite-terrestrial links,
URLLC rate (coverage plus a latency budget), and multi-flow interruption.
Distances are kilometres on the geometry side and metres inside the
path-loss term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.constants import speed_of_light
from scipy.integrate import quad

from .errors import DomainError, InfeasibleNetworkError
from .geometry import (
    ConstraintSet,
    TierSpec,
    chord_length,
    flow_arc_factor,
    max_dome_angle,
)
from .analytic import search_exponent
from .markov import GATEWAY_TIER, PriorityStrategy, StationaryDistribution
from .pipeline import AnalysisResult, run_analysis
from .simulator import Outcome, RoutePlan, trial_rng, estimate, run_route

logger = logging.getLogger(__name__)

KM = 1000.0
QUAD_EPSABS = 1e-6
DEFAULT_FADING_SAMPLES = 100_000
LINK_KINDS = ("sat_terrestrial", "inter_satellite")
FLOW_MODES = ("independent", "as_printed")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class LinkBudget:
    """Radio parameters of every link; all values linear SI units."""

    carrier_frequency: float = 20e9
    transmit_power: float = db_to_linear(15.0)
    antenna_gain: float = db_to_linear(41.7)
    bandwidth: float = 100e6
    noise_power: float = 3.6e-12
    rain_attenuation: float = db_to_linear(-2.0)
    package_size: float = 100e6
    sr_b: float = 0.158
    sr_m: float = 1.29
    sr_omega: float = 19.4
    snr_threshold: float = 1.0
    latency_threshold: float = 4.0

    def __post_init__(self):
        for name in (
            "carrier_frequency", "transmit_power", "antenna_gain", "bandwidth", "noise_power",
            "rain_attenuation", "package_size", "sr_b", "sr_omega", "snr_threshold", "latency_threshold",
        ):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"link budget {name} must be positive, got {getattr(self, name)}")
        if self.sr_m < 0.5:
            raise DomainError(f"Shadowed-Rician m must be >= 0.5, got {self.sr_m}")

    @property
    def shadowed_rician_params(self) -> Tuple[float, float, float]:
        return self.sr_b, self.sr_m, self.sr_omega

    def free_space_snr(self, distance_km):
        """Mean SNR without fading or rain at *distance_km*."""
        wavelength_term = speed_of_light / (4.0 * math.pi * self.carrier_frequency * np.asarray(distance_km) * KM)
        return self.transmit_power * self.antenna_gain * wavelength_term ** 2 / self.noise_power


def sample_shadowed_rician(b: float, m: float, omega: float, size, rng: np.random.Generator) -> np.ndarray:
    """Power gains of a Shadowed-Rician channel.

    The line-of-sight power is Gamma(m, omega/m) and the scattered part is
    complex Gaussian with power ``2b``, so the mean gain is ``omega + 2b``.
    """
    los = np.sqrt(rng.gamma(shape=m, scale=omega / m, size=size))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=size)
    scatter_re = rng.normal(0.0, math.sqrt(b), size=size)
    scatter_im = rng.normal(0.0, math.sqrt(b), size=size)
    return (los * np.cos(phase) + scatter_re) ** 2 + (los * np.sin(phase) + scatter_im) ** 2


def snr_sample(link_kind: str, distance: float, budget: LinkBudget, rng: np.random.Generator, size=None):
    """Received SNR (linear) of one link at *distance* km."""
    if not np.all(np.asarray(distance) > 0.0):
        raise DomainError(f"link distance must be positive, got {distance}")
    mean = budget.free_space_snr(distance)
    if link_kind == "inter_satellite":
        return mean if size is None else np.full(size, mean)
    if link_kind == "sat_terrestrial":
        fading = sample_shadowed_rician(*budget.shadowed_rician_params, size=size, rng=rng)
        return mean * budget.rain_attenuation * fading
    raise ValueError(f"unknown link kind {link_kind!r}; expected one of {LINK_KINDS}")


class FadingSurvival:
    """Empirical ``P[S > x]`` of the Shadowed-Rician gain from sorted draws."""

    def __init__(self, budget: LinkBudget, samples: int = DEFAULT_FADING_SAMPLES, seed: int = 0):
        draws = sample_shadowed_rician(*budget.shadowed_rician_params, size=samples, rng=np.random.default_rng(seed))
        self._sorted = np.sort(draws)

    def __call__(self, x):
        n = self._sorted.size
        return (n - np.searchsorted(self._sorted, x, side="right")) / n


def _contact_cdf(theta: float, n: int) -> float:
    return 1.0 - ((1.0 + math.cos(theta)) / 2.0) ** n


def _contact_pdf(theta: float, n: int) -> float:
    return n * ((1.0 + math.cos(theta)) / 2.0) ** (n - 1) * math.sin(theta) / 2.0


def _satellite_weights(v: StationaryDistribution) -> np.ndarray:
    weights = np.array(v.weights, dtype=float)
    weights[GATEWAY_TIER] = 0.0
    total = weights.sum()
    return weights / total if total > 0.0 else weights


def exceedance_sat_terrestrial(
    gamma: float,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    v: StationaryDistribution,
    budget: LinkBudget,
    survival: FadingSurvival,
) -> float:
    """``P[SNR_1 > gamma]`` averaged over the serving dome angle of each satellite tier."""
    if not gamma > 0.0:
        raise DomainError(f"SNR threshold must be positive, got {gamma}")
    weights = _satellite_weights(v)
    r_1 = tiers[GATEWAY_TIER].radius
    total = 0.0
    for i in np.flatnonzero(weights):
        n = tiers[i].count
        upper = max_dome_angle(GATEWAY_TIER, int(i), tiers, constraints)
        mass = _contact_cdf(upper, n)
        if n == 0 or mass <= 0.0:
            continue
        radius = tiers[i].radius

        def integrand(theta, radius=radius, n=n):
            distance = float(chord_length(r_1, radius, theta))
            scale = budget.free_space_snr(distance) * budget.rain_attenuation
            return _contact_pdf(theta, n) * float(survival(gamma / scale))

        value, _ = quad(integrand, 0.0, upper, epsabs=QUAD_EPSABS, limit=200)
        total += weights[i] * value / mass
    return float(min(max(total, 0.0), 1.0))


def exceedance_inter_satellite(
    gamma: float,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    v: StationaryDistribution,
    t1: np.ndarray,
    budget: LinkBudget,
) -> float:
    """``P[SNR_2 > gamma]`` from the truncated contact-angle CDF of each tier pair."""
    if not gamma > 0.0:
        raise DomainError(f"SNR threshold must be positive, got {gamma}")
    weights = _satellite_weights(v)
    # Free-space SNR falls as 1/d^2, so exceedance means d below this range.
    reach_km = float(1.0 / math.sqrt(gamma / budget.free_space_snr(1.0)))
    total = 0.0
    norm = 0.0
    k = len(tiers)
    for i in range(k):
        for j in range(k):
            if i == GATEWAY_TIER or j == GATEWAY_TIER:
                continue
            pair_weight = weights[i] * t1[i, j]
            n = search_exponent(i, j, tiers)
            if pair_weight <= 0.0 or n == 0:
                continue
            r_i, r_j = tiers[i].radius, tiers[j].radius
            upper = max_dome_angle(i, j, tiers, constraints)
            cos_reach = (r_i ** 2 + r_j ** 2 - reach_km ** 2) / (2.0 * r_i * r_j)
            theta_reach = math.acos(min(max(cos_reach, -1.0), 1.0))
            mass = _contact_cdf(upper, n)
            if mass <= 0.0:
                continue
            total += pair_weight * _contact_cdf(min(theta_reach, upper), n) / mass
            norm += pair_weight
    return float(total / norm) if norm > 0.0 else 0.0


def _analysis_for(tiers, constraints, strategy, analysis: Optional[AnalysisResult]) -> AnalysisResult:
    if analysis is not None:
        return analysis
    return run_analysis(tiers, constraints, strategy, mode="stationary_optimal")


def coverage_probability(
    gamma: float,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: Optional[PriorityStrategy],
    budget: LinkBudget,
    analysis: Optional[AnalysisResult] = None,
    survival: Optional[FadingSurvival] = None,
) -> float:
    """Probability that every hop of an ``N_h``-hop route clears *gamma*.

    The two end hops are satellite-terrestrial; the ``N_h - 2`` middle hops
    leave a gateway with the gateway tier's stationary weight.
    """
    if not gamma > 0.0:
        raise DomainError(f"SNR threshold must be positive, got {gamma}")
    result = _analysis_for(tiers, constraints, strategy, analysis)
    survival = survival or FadingSurvival(budget)
    p1 = exceedance_sat_terrestrial(gamma, tiers, constraints, result.stationary, budget, survival)
    p2 = exceedance_inter_satellite(gamma, tiers, constraints, result.stationary, result.matrices.t1, budget)
    v1 = float(result.stationary.weights[GATEWAY_TIER])
    middle = max(result.hop_stats.n_h, 2) - 2
    return float(p1 ** 2 * (v1 * p1 + (1.0 - v1) * p2) ** middle)


def mean_link_distances(v, theta_bar: float, tiers: Sequence[TierSpec]) -> Tuple[float, float]:
    """Mean satellite-terrestrial and inter-satellite hop lengths (km)."""
    weights = np.asarray(getattr(v, "weights", v), dtype=float)
    radii = np.array([t.radius for t in tiers])
    r_1 = tiers[GATEWAY_TIER].radius
    d_1 = float(np.dot(weights, chord_length(r_1, radii, theta_bar)))
    pair = chord_length(radii[:, None], radii[None, :], theta_bar)
    d_2 = float(weights @ pair @ weights)
    return d_1, d_2


def latency_threshold_snr(
    tau: float, n_h: int, d_1: float, d_2: float, budget: LinkBudget, mode: str = "dimensional"
) -> Optional[float]:
    """Per-hop SNR needed to meet the latency budget; ``None`` when unattainable.

    ``dimensional`` splits the buffering budget ``tau - D/c`` evenly over the
    hops, each sending ``package_size`` bits.  ``as_printed`` keeps the
    closed form without the package size.
    """
    n_h = max(n_h, 2)
    distance_m = (2.0 * d_1 + (n_h - 2) * d_2) * KM
    propagation = distance_m / speed_of_light
    if mode == "dimensional":
        budget_s = tau - propagation
        if budget_s <= 0.0:
            return None
        return 2.0 ** (n_h * budget.package_size / (budget.bandwidth * budget_s)) - 1.0
    if mode == "as_printed":
        exponent = tau * math.log(2.0) / (n_h * budget.bandwidth) - math.log(2.0) * distance_m / (
            speed_of_light * n_h * budget.bandwidth
        )
        return math.expm1(exponent)
    raise ValueError(f"unknown URLLC mode {mode!r}; expected 'dimensional' or 'as_printed'")


def urllc_rate(
    gamma: float,
    tau: float,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: Optional[PriorityStrategy],
    budget: LinkBudget,
    mode: str = "dimensional",
    analysis: Optional[AnalysisResult] = None,
    survival: Optional[FadingSurvival] = None,
) -> float:
    """Coverage at *gamma* times coverage at the latency-implied SNR threshold."""
    result = _analysis_for(tiers, constraints, strategy, analysis)
    survival = survival or FadingSurvival(budget)
    coverage = coverage_probability(gamma, tiers, constraints, strategy, budget, result, survival)
    d_1, d_2 = mean_link_distances(result.stationary, result.hop_stats.theta_bar, tiers)
    threshold = latency_threshold_snr(tau, result.hop_stats.n_h, d_1, d_2, budget, mode)
    if threshold is None:
        return 0.0
    if threshold <= 0.0:
        return coverage
    return coverage * coverage_probability(threshold, tiers, constraints, strategy, budget, result, survival)


def availability(
    tiers: Sequence[TierSpec], constraints: ConstraintSet, strategy: Optional[PriorityStrategy]
) -> float:
    """One minus the multi-hop interruption with only line-of-sight limits."""
    try:
        result = run_analysis(tiers, constraints.without_distance_limit(), strategy, mode="stationary_optimal")
    except InfeasibleNetworkError:
        logger.warning("No tier reachable without the distance limit; availability is 0")
        return 0.0
    return 1.0 - result.multihop


@dataclass(frozen=True)
class FlowSpec:
    """Dihedral angles of parallel flows around the shortest arc."""

    dihedral_angles: Tuple[float, ...]

    def __post_init__(self):
        if not self.dihedral_angles:
            raise DomainError("at least one flow is required")
        for theta in self.dihedral_angles:
            if not 0.0 <= theta < math.pi / 2.0:
                raise DomainError(f"dihedral angle must lie in [0, pi/2), got {theta}")


def multiflow_interruption(theta_dihedral: float, base_pm: float, theta_m: float) -> float:
    """Interruption of a single flow tilted by *theta_dihedral*."""
    return base_pm * flow_arc_factor(theta_dihedral, theta_m)


def combine_flows(flows: FlowSpec, base_pm: float, theta_m: float, mode: str = "independent") -> float:
    """Total interruption of parallel flows treated as independent.

    ``"independent"`` is the probability that every flow is interrupted.
    ``"as_printed"`` is ``1 - prod(1 - P)``, the probability that at least one
    flow is interrupted.
    """
    if mode not in FLOW_MODES:
        raise ValueError(f"unknown flow mode {mode!r}; expected one of {FLOW_MODES}")
    per_flow = [min(multiflow_interruption(theta, base_pm, theta_m), 1.0) for theta in flows.dihedral_angles]
    if mode == "independent":
        return float(np.prod(per_flow))
    return 1.0 - float(np.prod([1.0 - p for p in per_flow]))


def multiflow_total(
    flows: FlowSpec,
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: Optional[PriorityStrategy],
    analysis: Optional[AnalysisResult] = None,
    mode: str = "independent",
) -> float:
    result = _analysis_for(tiers, constraints, strategy, analysis)
    return combine_flows(flows, result.multihop, constraints.theta_m, mode)


@dataclass
class LinkMetricsEstimate:
    coverage: float
    urllc: float
    availability: float
    iterations: int


def _link_kind(tier_a: int, tier_b: int) -> str:
    if GATEWAY_TIER in (tier_a, tier_b):
        return "sat_terrestrial"
    return "inter_satellite"


def simulate_link_metrics(
    tiers: Sequence[TierSpec],
    constraints: ConstraintSet,
    strategy: PriorityStrategy,
    budget: LinkBudget,
    gamma: float,
    tau: float,
    iterations: int,
    seed: int,
    workers: int = 1,
) -> LinkMetricsEstimate:
    """Monte Carlo coverage, URLLC and availability on simulated routes.

    Hops touching the gateway tier are faded; a route counts toward URLLC
    when it is covered and its propagation plus buffering delay fits *tau*.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not gamma > 0.0:
        raise DomainError(f"SNR threshold must be positive, got {gamma}")
    plan = RoutePlan.build(tiers, constraints, strategy)
    covered = 0
    in_time = 0
    for trial in range(iterations):
        rng = trial_rng(seed, trial)
        trace = run_route(tiers, constraints, strategy, rng, plan=plan)
        if trace.outcome is not Outcome.SUCCESS:
            continue
        endpoints = trace.tier_sequence + [GATEWAY_TIER]
        snrs = np.array([
            snr_sample(_link_kind(a, b), d, budget, rng)
            for a, b, d in zip(endpoints, endpoints[1:], trace.hop_distances)
        ], dtype=float)
        if not np.all(snrs > gamma):
            continue
        covered += 1
        delay = sum(trace.hop_distances) * KM / speed_of_light
        delay += float(np.sum(budget.package_size / (budget.bandwidth * np.log2(1.0 + snrs))))
        if delay <= tau:
            in_time += 1
    unlimited = estimate(tiers, constraints.without_distance_limit(), strategy, iterations, seed, workers)
    return LinkMetricsEstimate(
        coverage=covered / iterations,
        urllc=in_time / iterations,
        availability=1.0 - unlimited.interruption_probability,
        iterations=iterations,
    )
