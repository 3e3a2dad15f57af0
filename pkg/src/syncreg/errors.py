"""Exception types raised across the package."""


class SyncRegError(Exception):
    """Base class for package errors."""


class ConfigError(SyncRegError, ValueError):
    """Invalid scenario description."""


class DivergenceError(SyncRegError, RuntimeError):
    """A trajectory left the admissible region or became non-finite."""

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} at t={time:.6g}"
        super().__init__(message)
        self.time = time
