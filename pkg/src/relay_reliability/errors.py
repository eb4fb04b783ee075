"""Exception hierarchy shared by every stage of the reliability toolkit."""

from __future__ import annotations

from typing import TYPE_CHECKING, List, Optional

if TYPE_CHECKING:
    from .diagnosis import Diagnosis


class RelayReliabilityError(Exception):
    """Base class for all errors raised by ``relay_reliability``."""


class InvalidGeometryError(RelayReliabilityError, ValueError):
    """Degenerate geometric input (zero-norm or coincident points)."""


class DomainError(RelayReliabilityError, ValueError):
    """An argument lies outside the domain of a closed-form expression."""


class NonAbsorbingChainError(RelayReliabilityError):
    """Some transient state can never reach the absorbing state."""


class NoFeasibleStrategyError(RelayReliabilityError):
    """No priority strategy yields a non-empty reachable set."""


class SearchBudgetError(RelayReliabilityError):
    """Exhaustive strategy enumeration would exceed the tier budget."""


class ConfigError(RelayReliabilityError, ValueError):
    """Experiment configuration failed to parse or validate.

    ``problems`` lists every violation found, not only the first one.
    """

    def __init__(self, problems: List[str], path: Optional[str] = None):
        self.problems = list(problems)
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(where + "; ".join(self.problems))


class InfeasibleNetworkError(RelayReliabilityError):
    """The route from the gateway tier cannot make progress."""

    def __init__(self, message: str, diagnoses: Optional[List["Diagnosis"]] = None):
        self.diagnoses = list(diagnoses or [])
        super().__init__(message)
