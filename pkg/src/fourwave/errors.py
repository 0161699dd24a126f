class FourWaveError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(FourWaveError, ValueError):
    """Inputs violate a documented precondition or invariant."""

    exit_code = 2

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConfigError(ValidationError):
    pass


class NumericError(FourWaveError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, step: int | None = None, report: dict | None = None):
        self.step = step
        self.report = report or {}
        super().__init__(message if step is None else f"{message} (step {step})")


class ResourceError(FourWaveError, MemoryError):
    exit_code = 4


class StateError(FourWaveError, RuntimeError):
    """An operation was called before the data it depends on exists."""

    exit_code = 3


class RangeError(FourWaveError, IndexError):
    """A time argument falls outside a tabulated range."""

    exit_code = 3
