"""
Exception hierarchy for the cooperative beamforming library.

All errors raised on purpose by the library derive from LeoCoopBfError so
that the experiment runner can record a failed drop without masking bugs.
"""

from typing import Optional


class LeoCoopBfError(Exception):
    """Base class for library errors."""


class ConfigurationError(LeoCoopBfError, ValueError):
    """Invalid configuration value.

    Attributes:
        field: Name of the offending configuration key.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InfeasibleSceneError(LeoCoopBfError):
    """Not enough satellites visible to build the requested scene."""


class DegenerateGeometryError(LeoCoopBfError):
    """Geometry with a zero-length satellite-to-UT ray or similar."""


class DomainError(LeoCoopBfError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ShapeError(LeoCoopBfError, ValueError):
    """Array dimensions do not agree."""


class NumericError(LeoCoopBfError, ArithmeticError):
    """Non-finite values, singular systems or degenerate divisions."""


class TopologyError(LeoCoopBfError):
    """Invalid or disconnected inter-satellite link graph."""


class LocalSolveError(LeoCoopBfError):
    """A per-satellite solve failed inside a consensus round.

    Attributes:
        satellite: Index of the satellite whose solve failed.
    """

    def __init__(self, satellite: int, message: str, cause: Optional[BaseException] = None):
        super().__init__(f"satellite {satellite}: {message}")
        self.satellite = satellite
        self.cause = cause


class OverheadMismatchError(LeoCoopBfError):
    """Counted ISL traffic disagrees with the closed-form overhead."""
