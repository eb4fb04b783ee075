"""Three-tier case study shared by the tests, with its reference values."""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relay_reliability.geometry import ConstraintSet, TierSpec

CONFIGS_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

CASE_P_I = np.array([
    [1.0, 0.8208, 0.0466],
    [0.6549, 0.5074, 0.0503],
    [0.2787, 0.5591, 0.0659],
])
CASE_P_S = np.array([0.0383, 0.0166, 0.0102])
CASE_V = np.array([0.0255, 0.0286, 0.9459])
CASE_MU = np.array([87.516, 89.4314, 89.9615])
CASE_THETA_BAR = 0.4915
CASE_N_H = 6
CASE_MULTIHOP = 0.1031

# Last entry of w for each strategy of the case study.
CASE_WEIGHTED = {
    (3, 2, 1): 0.0111,
    (2, 3, 1): 0.0116,
    (3, 1, 2): 0.0137,
    (2, 1, 3): 0.0191,
    (1, 3, 2): 0.0220,
    (1, 2, 3): 0.0221,
}

slow = pytest.mark.skipif(
    os.environ.get("RELAY_SLOW_TESTS") != "1",
    reason="long Monte Carlo run; set RELAY_SLOW_TESTS=1",
)


def case_tiers():
    return [
        TierSpec.at_height(0, 300),
        TierSpec.at_height(575, 140),
        TierSpec.at_height(1200, 720),
    ]


def case_constraints(theta_m=math.pi):
    return ConstraintSet(theta_r=math.pi / 6, theta_s=math.pi / 10, d_th=4000.0, theta_m=theta_m)


def no_satellite_tiers():
    """Gateways under an empty satellite shell: nothing can relay."""
    return [TierSpec.at_height(0, 300), TierSpec.at_height(1200, 0)]
