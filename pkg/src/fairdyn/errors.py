"""Exception hierarchy shared across the package.

Errors split into two families for CLI exit-code purposes: validation and
usage problems (exit 1) versus infeasibility and capacity limits (exit 2).
"""


class FairdynError(Exception):
    """Base class for all package errors."""


class DimensionError(FairdynError):
    """Array shapes or lengths are inconsistent."""


class DomainError(FairdynError):
    """A value lies outside its permitted domain."""


class UndefinedConditionalError(FairdynError):
    """A conditional rate was requested on a zero-probability event."""


class StructureError(FairdynError):
    """A graph or model structure is malformed (cycles, missing nodes)."""


class ConfigError(FairdynError):
    """A scenario or model file failed validation."""


class InfeasibilityError(FairdynError):
    """No policy satisfies the requested constraints."""


class CapacityError(FairdynError):
    """A configured resource cap would be exceeded."""
