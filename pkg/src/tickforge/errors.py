"""Exception hierarchy shared by the library and the CLI."""


class TickforgeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(TickforgeError, ValueError):
    """Bad parameters or configuration."""

    exit_code = 2


class DataError(TickforgeError, ValueError):
    """Input data that violates a format or domain invariant."""

    exit_code = 3
