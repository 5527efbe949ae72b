"""Exception hierarchy shared by the numerical modules.

Every failure that comes from the data or the numerics (as opposed to a
bad configuration) derives from ``NumericalError`` so the CLI can map it
to a single exit code.
"""
from __future__ import annotations


class NumericalError(Exception):
    """Base class for numerical failures (singular systems, empty selections...)."""

    pass


class LpError(NumericalError):
    """Raised when the simplex solver cannot return an optimal vertex."""

    pass


class DataModelError(NumericalError):
    """Raised when a simulation design is degenerate (non-PD covariance, 0/0 R²)."""

    pass


class DantzigError(NumericalError):
    """Raised when Dantzig selection or the Gaussian Dantzig refit fails."""

    pass


class ScreeningError(NumericalError):
    """Raised when marginal screening is undefined for the data."""

    pass


class InstrumentError(NumericalError):
    """Raised when the instrument vector cannot be constructed."""

    pass


class PlmError(NumericalError):
    """Raised when the partially linear fit is not identifiable or underflows."""

    pass


class BenchError(NumericalError):
    """Raised when too many Monte Carlo repetitions fail."""

    pass
