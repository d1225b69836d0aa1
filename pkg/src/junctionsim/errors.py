"""Exception hierarchy for junctionsim.

Configuration errors carry the offending field in the message so a bad config
file can be fixed without reading source.
"""

from __future__ import annotations


class JunctionSimError(Exception):
    """Base class for all junctionsim errors."""


class ConfigError(JunctionSimError):
    """Base class for invalid line/control/demand descriptions."""


class ConfigParse(ConfigError):
    """A scenario config file cannot be parsed or is missing required fields."""


class NonPositiveRunTime(ConfigError):
    """A segment run time (nominal or minimum) is not strictly positive."""


class MarginViolation(ConfigError):
    """A segment's minimum run time exceeds its nominal run time."""


class SaturatedPlatform(ConfigError):
    """A platform's arrival rate reaches or exceeds its service rate (lambda/alpha >= 1)."""


class EmptyPart(ConfigError):
    """A line part (central direction or branch direction) has no segments, or a part has no platform."""


class InfeasibleSeed(ConfigError):
    """No initial train placement realizes the requested (m, dm) on this line."""


class NegativeInterval(JunctionSimError):
    """An accumulation interval passed to the dwell law is negative."""


class Deadlock(JunctionSimError):
    """No segment can emit a further departure in finite time.

    ``segments`` holds one blocking cycle (segment ids in wait-for order).
    """

    def __init__(self, message: str, segments: tuple[int, ...] = ()):
        super().__init__(message)
        self.segments = tuple(segments)


class WindowTooShort(JunctionSimError):
    """A rolling departure window evicted a count that the recursion still references."""


class DimensionMismatch(JunctionSimError):
    """Max-plus operands have incompatible shapes."""


class NotStronglyConnected(JunctionSimError):
    """The finite-entry precedence graph of a max-plus matrix is not strongly connected."""


class DemandNotZero(JunctionSimError):
    """Matrix assembly was requested for a line whose platforms have nonzero demand."""


class InsufficientData(JunctionSimError):
    """Too few post-transient counts to estimate a growth rate."""


class Unclassifiable(JunctionSimError):
    """The binding census matches no phase within the configured thresholds."""


class MissingRegion(JunctionSimError):
    """A boundary was requested between phase regions that are not both present."""


class GridMismatch(JunctionSimError):
    """Two phase diagrams cover different (m, dm) grids and cannot be compared."""
