"""
Exception hierarchy shared by the library and the command line.
"""


class EaqgaError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(EaqgaError, ValueError):
    """Bad arguments, dimension mismatches or invalid configuration values."""


class DataError(EaqgaError):
    """Malformed or unreadable problem, price or experiment files."""


class OracleLimitError(UsageError):
    """Exhaustive search refused because the problem is larger than the limit."""


class PlanError(EaqgaError):
    """A sampling plan violates its structural invariants."""
