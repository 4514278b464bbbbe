"""Exception types shared across the package.

Two failure families matter to callers: bad inputs (rejected up front,
CLI exit code 2) and numerical breakdowns discovered mid-computation
(CLI exit code 3).
"""


class ParameterError(ValueError):
    """An input violates a documented constraint; the message names it."""


class ConditioningError(ParameterError):
    """Conditioning left a degenerate law (e.g. nonpositive residual variance)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""


class BracketError(NumericalError):
    """Root bracketing failed after the allowed number of expansions."""


class TriggerError(NumericalError):
    """A Monte Carlo trigger estimate degenerated (no sample on one side)."""
