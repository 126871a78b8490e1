"""Exception types shared across the package."""


class AxiGuardError(Exception):
    """Base class for all package errors."""


class ConfigError(AxiGuardError):
    """Invalid simulator / attack / run configuration."""


class SimHorizonExceeded(AxiGuardError):
    """Simulation horizon too short to produce the requested corpus."""


class SchemaError(AxiGuardError):
    """Dataset column mismatch or unknown column."""


class CsvFormatError(AxiGuardError):
    """Malformed CSV input; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InsufficientData(AxiGuardError):
    """Too few rows (or too few samples of one class) for the operation."""


class DegenerateData(AxiGuardError):
    """Input with no usable variance."""


class DegenerateTestSet(AxiGuardError):
    """Evaluation set missing one of the two classes."""


class NumericError(AxiGuardError):
    """Non-finite loss during training; carries the epoch it appeared in."""

    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")
        self.epoch = epoch


class FormatError(AxiGuardError):
    """Fixed-point format unable to represent the values it is given."""


class DimensionError(AxiGuardError):
    """Feature vector / model shape mismatch."""
