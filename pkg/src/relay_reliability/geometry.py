"""Spherical geometry primitives for concentric relay tiers.

Dome angles (central angles at the Earth's centre), direction angles
measured in the tangent plane of the transmitting relay, the maximum dome
angle allowed between two tiers, spherical-cap areas, and uniform point
sampling on spheres.  All angles are radians; lengths are kilometres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np

from .errors import InvalidGeometryError

EARTH_RADIUS_KM = 6371.0

# Boundary slack for the closed constraints (c1)-(c3); absorbs arccos drift.
ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class TierSpec:
    """One concentric shell of relay devices (a homogeneous BPP)."""

    radius: float
    height: float
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise InvalidGeometryError(f"tier count must be >= 0, got {self.count}")
        if self.height < 0:
            raise InvalidGeometryError(f"tier height must be >= 0, got {self.height}")
        if not math.isclose(self.radius, EARTH_RADIUS_KM + self.height, rel_tol=1e-12):
            raise InvalidGeometryError(
                f"tier radius {self.radius} does not equal Earth radius + height {self.height}"
            )

    @classmethod
    def at_height(cls, height: float, count: int) -> "TierSpec":
        return cls(radius=EARTH_RADIUS_KM + float(height), height=float(height), count=int(count))

    @property
    def density(self) -> float:
        """Devices per square kilometre of the shell."""
        return self.count / (4.0 * math.pi * self.radius ** 2)


@dataclass(frozen=True)
class ConstraintSet:
    """Routing constraints (c1)-(c3) plus the transmitter-receiver dome angle.

    ``theta_r`` is the full opening of the admissible sector around the
    receiver direction, so a candidate passes (c1) when its direction angle
    is at most ``theta_r / 2``.
    """

    theta_r: float
    theta_s: float
    d_th: float
    theta_m: float

    def __post_init__(self):
        problems = constraint_problems(self.theta_r, self.theta_s, self.d_th, self.theta_m)
        if problems:
            raise InvalidGeometryError("; ".join(problems))

    @property
    def half_opening(self) -> float:
        return self.theta_r / 2.0

    def without_distance_limit(self) -> "ConstraintSet":
        """Same constraints with ``d_th`` removed (joint line-of-sight only)."""
        return replace(self, d_th=math.inf)


def constraint_problems(theta_r: float, theta_s: float, d_th: float, theta_m: float) -> List[str]:
    """Return every violated constraint invariant (empty when valid)."""
    problems: List[str] = []
    if not 0.0 < theta_r <= math.pi:
        problems.append(f"theta_r must lie in (0, pi], got {theta_r}")
    if not 0.0 < theta_s < math.pi:
        problems.append(f"theta_s must lie in (0, pi), got {theta_s}")
    if not d_th > 0.0:
        problems.append(f"d_th must be positive, got {d_th}")
    if not 0.0 < theta_m <= math.pi:
        problems.append(f"theta_m must lie in (0, pi], got {theta_m}")
    return problems


def validate_tiers(tiers: Sequence[TierSpec]) -> None:
    """Check that tiers are non-empty, start at the ground, and grow outward."""
    if not tiers:
        raise InvalidGeometryError("at least one tier is required")
    if tiers[0].height != 0.0:
        raise InvalidGeometryError("the first tier must be the terrestrial tier (height 0)")
    for lower, upper in zip(tiers, tiers[1:]):
        if not upper.radius > lower.radius:
            raise InvalidGeometryError("tier radii must be strictly increasing")


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A device position on the shell of its tier."""

    tier_index: int
    position: np.ndarray

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.position))

    @classmethod
    def from_angles(cls, tier_index: int, radius: float, polar: float, azimuth: float = 0.0) -> "SpherePoint":
        """Point at polar angle *polar* from the +z pole and longitude *azimuth*."""
        position = radius * np.array(
            [math.sin(polar) * math.cos(azimuth), math.sin(polar) * math.sin(azimuth), math.cos(polar)]
        )
        return cls(tier_index=tier_index, position=position)


def _unit(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidGeometryError("point has zero or non-finite norm")
    return vector / norm


def _clamped_arccos(value):
    return np.arccos(np.clip(value, -1.0, 1.0))


def dome_angle(p: SpherePoint, q: SpherePoint) -> float:
    """Central angle between two devices, in ``[0, pi]``."""
    return float(_clamped_arccos(np.dot(_unit(p.position), _unit(q.position))))


def _tangent_projection(direction: np.ndarray, axis: np.ndarray) -> np.ndarray:
    return direction - np.dot(direction, axis) * axis


def direction_angle(current: SpherePoint, candidate: SpherePoint, receiver: SpherePoint) -> float:
    """Angle at *current* between the candidate and receiver directions.

    Both directions are projected onto the tangent plane of the current
    relay, i.e. the angle is the difference in azimuth around the current
    relay's radial axis.  A candidate on the great-circle arc from the
    current relay toward the receiver has direction angle 0.
    """
    axis = _unit(current.position)
    toward_candidate = _tangent_projection(_unit(candidate.position), axis)
    toward_receiver = _tangent_projection(_unit(receiver.position), axis)
    if np.linalg.norm(toward_candidate) < 1e-15 or np.linalg.norm(toward_receiver) < 1e-15:
        raise InvalidGeometryError("direction angle is undefined for points on the current radial axis")
    cross = np.linalg.norm(np.cross(toward_candidate, toward_receiver))
    return float(math.atan2(cross, float(np.dot(toward_candidate, toward_receiver))))


def _distance_term(r_i: float, r_j: float, d_th: float) -> float:
    if math.isinf(d_th):
        return math.pi
    return float(_clamped_arccos((r_i ** 2 + r_j ** 2 - d_th ** 2) / (2.0 * r_i * r_j)))


def _blockage_term(r_i: float, r_j: float) -> float:
    r_1 = EARTH_RADIUS_KM
    return float(_clamped_arccos(r_1 / r_i) + _clamped_arccos(r_1 / r_j))


def link_dome_limit(r_i: float, r_j: float, d_th: float) -> float:
    """Largest dome angle at which two devices stay within ``d_th`` and in sight."""
    return min(_distance_term(r_i, r_j, d_th), _blockage_term(r_i, r_j))


def max_dome_angle(i: int, j: int, tiers: Sequence[TierSpec], constraints: ConstraintSet) -> float:
    """Maximum dome angle between relays of tiers *i* and *j* (0-based)."""
    k = len(tiers)
    if not (0 <= i < k and 0 <= j < k):
        raise IndexError(f"tier index out of range: ({i}, {j}) for {k} tiers")
    limit = link_dome_limit(tiers[i].radius, tiers[j].radius, constraints.d_th)
    return max(constraints.theta_s, limit)


def max_dome_matrix(tiers: Sequence[TierSpec], constraints: ConstraintSet) -> np.ndarray:
    k = len(tiers)
    return np.array([[max_dome_angle(i, j, tiers, constraints) for j in range(k)] for i in range(k)])


def cap_area_fraction(theta: float) -> float:
    """Fraction of a sphere covered by a cap of dome angle *theta*."""
    return (1.0 - math.cos(theta)) / 2.0


def sector_area_fraction(theta_r: float, inner: float, outer: float) -> float:
    """Fraction of a sphere in the annular sector of opening *theta_r*."""
    return theta_r / (4.0 * math.pi) * (math.cos(inner) - math.cos(outer))


def chord_length(r_i: float, r_j: float, theta) -> np.ndarray:
    """Straight-line distance between shells *r_i*, *r_j* at dome angle *theta*."""
    return np.sqrt(np.maximum(r_i ** 2 + r_j ** 2 - 2.0 * r_i * r_j * np.cos(theta), 0.0))


def sample_sphere_array(radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, 3)`` array of i.i.d. uniform points on the sphere of *radius*."""
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    if n == 0:
        return np.empty((0, 3))
    gaussian = rng.standard_normal((n, 3))
    norms = np.linalg.norm(gaussian, axis=1, keepdims=True)
    # A zero-norm isotropic draw has probability zero; redraw to stay exact.
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        gaussian[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(gaussian, axis=1, keepdims=True)
    return radius * gaussian / norms


def sample_uniform_sphere(
    radius: float, n: int, rng: np.random.Generator, tier_index: int = 0
) -> List[SpherePoint]:
    """*n* points i.i.d. uniform on the sphere of *radius*."""
    return [SpherePoint(tier_index, row) for row in sample_sphere_array(radius, n, rng)]


def feasible(
    candidate: SpherePoint,
    current: SpherePoint,
    receiver: SpherePoint,
    constraints: ConstraintSet,
    theta_max: float,
) -> bool:
    """True iff *candidate* satisfies (c1)-(c3) as the next relay of *current*."""
    theta = dome_angle(current, candidate)
    if theta < constraints.theta_s - ANGLE_TOL or theta > theta_max + ANGLE_TOL:
        return False
    return direction_angle(current, candidate, receiver) <= constraints.half_opening + ANGLE_TOL


def feasible_mask(
    candidates: np.ndarray,
    current: np.ndarray,
    receiver: np.ndarray,
    constraints: ConstraintSet,
    theta_max: float,
) -> np.ndarray:
    """Vectorised :func:`feasible` over an ``(n, 3)`` array of candidates."""
    if candidates.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    axis = _unit(current)
    units = candidates / np.linalg.norm(candidates, axis=1, keepdims=True)
    cos_dome = units @ axis
    theta = _clamped_arccos(cos_dome)
    in_ring = (theta >= constraints.theta_s - ANGLE_TOL) & (theta <= theta_max + ANGLE_TOL)

    toward_receiver = _tangent_projection(_unit(receiver), axis)
    toward_candidates = units - cos_dome[:, None] * axis
    cross = np.linalg.norm(np.cross(toward_candidates, toward_receiver), axis=1)
    dot = toward_candidates @ toward_receiver
    direction = np.arctan2(cross, dot)
    return in_ring & (direction <= constraints.half_opening + ANGLE_TOL)


def flow_arc_factor(theta_dihedral: float, theta_m: float) -> float:
    """Length of a flow tilted by *theta_dihedral* relative to the shortest arc.

    Equals 1 for the shortest-arc flow and for antipodal endpoints.
    """
    if not 0.0 <= theta_dihedral < math.pi / 2.0:
        raise InvalidGeometryError(f"dihedral angle must lie in [0, pi/2), got {theta_dihedral}")
    half = theta_m / 2.0
    spread = math.sqrt(max(1.0 - (math.cos(half) * math.sin(theta_dihedral)) ** 2, 0.0))
    # Rounding can push the arcsin argument past 1 near theta_m = pi.
    arc = math.asin(min(math.sin(half) / spread, 1.0))
    return half / (spread * arc)
