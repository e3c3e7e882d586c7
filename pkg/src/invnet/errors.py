"""Error taxonomy shared by the library and the CLI exit codes."""


class InvnetError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class ConfigError(InvnetError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""

    exit_code = 2


class DataError(InvnetError):
    """Missing or malformed datasets / model files (CLI exit code 3)."""

    exit_code = 3


class NumericError(InvnetError):
    """Non-finite values or numerical failure during compute (CLI exit code 4)."""

    exit_code = 4
