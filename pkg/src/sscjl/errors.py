"""Exception hierarchy shared across the package."""


class SSCJLError(Exception):
    """Base class for all package errors."""


class ParameterError(SSCJLError, ValueError):
    """An argument lies outside its admissible domain."""

    def __init__(self, name, message):
        self.name = name
        super().__init__(f"{name}: {message}")


class DomainError(ParameterError):
    """A bound was evaluated where it does not exist (e.g. MGF pole)."""


class ShapeError(SSCJLError, ValueError):
    pass


class DataError(SSCJLError, ValueError):
    """Input data is malformed (ragged rows, non-finite values, empty file)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NormalizationError(SSCJLError, ValueError):
    pass


class CapacityError(SSCJLError, RuntimeError):
    """A brute-force routine was asked to enumerate too many configurations."""
