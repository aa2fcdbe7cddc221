"""Exception types shared across the package."""


class CgmcError(Exception):
    """Base class for all package errors."""


class ValidationError(CgmcError):
    """Invalid argument or inconsistent sizes."""


class UndefinedMomentError(CgmcError):
    """A conditional moment was requested below its minimal cell size."""


class EnumerationCapError(CgmcError):
    """State space too large for exhaustive enumeration."""


class ConfigError(CgmcError):
    """Config file failed validation; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
