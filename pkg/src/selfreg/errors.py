"""Exception types shared across the engine."""

from __future__ import annotations


class SelfRegError(Exception):
    """Base class for all engine errors."""


class ScenarioParseError(SelfRegError):
    """The scenario document is not structurally readable."""


class ScenarioValidationError(SelfRegError):
    """The scenario document parsed but violates invariants.

    Carries the full list of violations so callers can report all of
    them at once instead of fixing one at a time.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownGoalError(SelfRegError):
    """A goal id was requested that the hierarchy does not contain."""


class UnobservableGoalError(SelfRegError):
    """An observation is missing the channel for a goal."""


class EngineInvariantError(SelfRegError):
    """A runtime invariant was violated mid-episode; the episode aborts."""
