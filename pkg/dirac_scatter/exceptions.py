"""Custom exceptions for dirac-scatter."""


class DiracScatterError(Exception):
    """Base exception for dirac-scatter errors."""

    pass


class ConfigurationError(DiracScatterError, ValueError):
    """Raised when configuration is invalid."""

    pass


class PoleProximityError(DiracScatterError):
    """Raised when an evaluation is requested too close to a free eigenvalue."""

    def __init__(self, message: str, level: float) -> None:
        super().__init__(message)
        self.level = level


class NotAFreeEigenvalueError(DiracScatterError):
    """Raised when a pole query names a value outside the free spectrum."""

    pass


class RootCountError(DiracScatterError):
    """Raised when the root bookkeeping on an interval does not add up."""

    def __init__(self, message: str, interval: tuple[float, float]) -> None:
        super().__init__(message)
        self.interval = interval


class ConvergenceError(DiracScatterError):
    """Raised when a lattice sum misses its tolerance."""

    pass
