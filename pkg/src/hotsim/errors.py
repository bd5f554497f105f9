"""Exception classes shared across the package.

Each class maps to one CLI exit code so that callers can tell apart bad
configuration, demand patterns outside the model's assumptions, controller
failures, and I/O problems.
"""


class HotSimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HotSimError):
    """Invalid, unknown, or missing configuration keys and values."""


class ScenarioAssumptionError(HotSimError):
    """Demand pattern outside the congested regime the model assumes.

    Raised when the HOV demand saturates the HOT capacity or the total
    demand does not exceed the HOT capacity, which makes the price law's
    log argument non-positive.
    """


class PriceUndefinedError(HotSimError):
    """The controller cannot produce a finite price (degenerate estimate)."""


class BoundaryNotBracketedError(HotSimError):
    """Both ends of a bisection bracket classify as the same pattern."""
