"""Exception hierarchy shared by all driftbound modules."""

from __future__ import annotations


class DriftboundError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(DriftboundError):
    """A distribution or operation parameter is outside its legal range."""


class NonNegativeDrift(DriftboundError):
    """The increment law has E[X] >= 0; the walk does not drift down."""


class MomentDoesNotExist(DriftboundError):
    """A requested power moment is infinite for this law."""


class InfiniteVariance(DriftboundError):
    """Var(X) is infinite but the operation requires a second moment."""


class InvalidOrder(DriftboundError):
    """The moment order t is outside the range the inequality allows."""


class ValidityViolation(DriftboundError):
    """A bound precondition fails; carries the full check record."""

    def __init__(self, message: str, checks=()):
        super().__init__(message)
        self.checks = tuple(checks)


class RateNotCertified(DriftboundError):
    """A candidate exponential rate h fails the truncated-mgf condition."""


class StepLimitExceeded(DriftboundError):
    """A simulated replication exceeded the safety step cap."""
