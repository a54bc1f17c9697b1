"""Exception hierarchy shared across the solver and the CLI."""


class StefanBakeError(Exception):
    """Base class for all package errors."""


class MalformedInputError(StefanBakeError, ValueError):
    """Input data cannot be interpreted (empty grids, unsorted samples, bad shapes)."""


class DomainError(StefanBakeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(StefanBakeError, ValueError):
    """Inconsistent solver or sweep configuration, detected before any step."""


class StepFailure(StefanBakeError, RuntimeError):
    """A time step could not be completed.

    ``residual`` carries the last nonlinear residual or Picard increment so the
    driver can decide whether to retry with a smaller step.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class MoistureFloorViolated(StefanBakeError, RuntimeError):
    """Front moisture dropped below the safeguard threshold of the Stefan velocity."""

    def __init__(self, message, value=float("nan")):
        super().__init__(message)
        self.value = value


class MalformedArtifactError(StefanBakeError, ValueError):
    """A run artifact is missing files or columns."""


class SchemaVersionError(StefanBakeError, ValueError):
    """A run artifact was written with an incompatible schema version."""
