"""Exception types shared across the package."""

from __future__ import annotations


class DelayWaveError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometryError(DelayWaveError):
    """Segment breakpoints are not ordered or stiffnesses are not positive."""


class InvalidDelayBoundError(DelayWaveError):
    """Declared delay bounds violate 0 < tau0 <= tau1 or 0 <= d < 1."""


class MalformedSpecError(DelayWaveError):
    """A problem description could not be parsed or evaluated."""


class CertificationError(DelayWaveError):
    """Hypotheses failed certification and no override was requested."""


class ResolutionError(DelayWaveError):
    """Grid too coarse for the requested geometry or stencil."""


class InconsistentInitialDataError(DelayWaveError):
    """Initial data violates boundary, interface, or history compatibility."""


class OrderingError(DelayWaveError):
    """History entries pushed with a non-monotone or uneven timestamp."""


class HistoryUnderflowError(DelayWaveError):
    """Delayed-trace query fell outside the stored history span."""


class InstabilityError(DelayWaveError):
    """Nodal values blew up; carries the offending step index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class HypothesisViolationError(DelayWaveError):
    """A run-time quantity left the regime the hypotheses guarantee."""


class StreamError(DelayWaveError):
    """Diagnostic records are missing or not consecutive."""


class InsufficientDecayDataError(DelayWaveError):
    """No records above the decay-fit floor inside the requested window."""


class EquivalenceViolationError(DelayWaveError):
    """Composite functional incompatible with the energy along a trajectory."""


class InsufficientDataError(DelayWaveError):
    """Too few records for the requested estimate."""


class UsageError(DelayWaveError):
    """Bad command-line arguments or config layout."""
