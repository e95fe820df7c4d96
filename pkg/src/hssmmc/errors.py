"""Exception types shared across the toolkit."""


class HssError(Exception):
    """Base class for all toolkit errors."""


class OrderMismatchError(HssError):
    """Two harmonic quantities have different truncation order or base frequency."""


class InsufficientSamplesError(HssError):
    """Too few samples to resolve the requested harmonic order."""


class ResidualImaginaryError(HssError):
    """A quantity that should describe a real signal has a non-negligible imaginary part."""


class ModulationOutOfRangeError(HssError):
    """Modulation index outside [0, 1]."""


class DimensionMismatchError(HssError):
    """Block or vector dimensions are inconsistent."""


class SingularSystemError(HssError):
    """The lifted system matrix is numerically singular or a solve failed its residual check."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class UnknownVariableError(HssError):
    """Requested state variable or phase label does not exist."""


class NotSettledError(HssError):
    """Trajectory has not reached a periodic steady state."""


class NumericalBlowupError(HssError):
    """A simulated state left the physically plausible range."""


class StepTooLargeError(HssError):
    """Integration step violates the explicit-scheme stability bound."""


class SchemaViolationError(HssError):
    """Configuration file is malformed, has unknown keys, or fails an invariant."""
