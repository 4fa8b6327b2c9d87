"""Error hierarchy for ncsbound."""


class NcsBoundError(Exception):
    """Base class for all ncsbound errors."""


class ConfigError(NcsBoundError, ValueError):
    """Invalid or unparsable configuration."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        """Initialize configuration error.

        Args:
            message: Human readable diagnostic
            field: Dotted path of the offending configuration key
            line: Line number in the source file, when known
        """
        self.field = field
        self.line = line
        location = ""
        if line is not None:
            location += f"line {line}: "
        if field is not None:
            location += f"{field}: "
        super().__init__(f"{location}{message}")


class ModelError(NcsBoundError, ValueError):
    """Reference to something the network model does not contain."""


class UnstableInput(NcsBoundError, ValueError):
    """A rate reaches or exceeds the capacity that serves it."""


class NonConvergent(NcsBoundError, RuntimeError):
    """Burstiness equations have no finite non-negative solution."""

    def __init__(self, message: str, *, component: str | None = None):
        self.component = component
        super().__init__(message)


class UnitMismatch(NcsBoundError, ValueError):
    """Quantities expressed in different time units were combined."""


class PoleOnAxis(NcsBoundError, ZeroDivisionError):
    """Transfer function evaluated at one of its poles."""


class ImproperTransferFunction(NcsBoundError, ValueError):
    """Numerator degree exceeds denominator degree."""


class NominallyUnstable(NcsBoundError, RuntimeError):
    """Closed loop is unstable without delay, so delay criteria do not apply."""


class EnvelopeViolation(NcsBoundError, RuntimeError):
    """Generated traffic exceeded its declared arrival curve."""

    def __init__(self, message: str, *, stream_id: str | None = None, time: float | None = None):
        self.stream_id = stream_id
        self.time = time
        super().__init__(message)
