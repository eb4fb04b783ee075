"""relay_reliability - routing reliability of multi-tier satellite-terrestrial relay networks."""

__version__ = "0.1.0"
