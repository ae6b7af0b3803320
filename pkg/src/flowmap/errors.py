"""Exception hierarchy shared across the package.

Three base classes partition failures by how the command-line front end
reports them: configuration problems (exit code 2), malformed or
insufficient data (exit code 3), and numeric breakdowns (exit code 4).
Module-specific exceptions subclass one of these.
"""


class FlowmapError(Exception):
    """Base class for all package errors."""


class ConfigError(FlowmapError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(FlowmapError):
    """Input data violates a precondition."""

    exit_code = 3


class NumericError(FlowmapError):
    """A numeric procedure failed (NaN loss, non-convergence)."""

    exit_code = 4
