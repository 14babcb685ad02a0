"""Exception types shared across the package."""


class EvanesimError(Exception):
    """Base class for all package errors."""


class ValidationError(EvanesimError, ValueError):
    """Bad physical or numerical input. `field` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(EvanesimError, ValueError):
    """Malformed configuration document. `path` is the JSON path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SolverError(EvanesimError, RuntimeError):
    """A linear solve or mode matching failed."""


class DomainError(SolverError):
    """Grid does not satisfy a solver precondition (too coarse or too short)."""


class ExtractionError(EvanesimError, RuntimeError):
    """A fit window is unusable (too short, empty, or contaminated)."""


class PhaseUnwrapError(ExtractionError):
    """Adjacent valid samples differ in phase by >= pi; unwrapping is ambiguous."""


class PacketError(ValidationError):
    """Wave-packet specification incompatible with the grid."""
