"""Exception hierarchy. Every error is a ``ValueError`` so callers can catch broadly."""


class WignerFramesError(ValueError):
    """Base class for all errors raised by this package."""


class LayoutError(WignerFramesError):
    """Register layout or dimension mismatch."""


class NormalizationError(WignerFramesError):
    """A vector or amplitude pair that must be normalized is not."""


class ContractError(WignerFramesError):
    """An input violates an operation's precondition (e.g. not a density matrix)."""


class BasisError(WignerFramesError):
    """A measurement basis is not orthonormal and complete."""


class DomainError(WignerFramesError):
    """A state has support outside the domain of a partial isometry."""


class ProtocolOrderError(DomainError):
    """A protocol step was executed before the steps it depends on."""


class SingularPostSelectionError(WignerFramesError):
    """Post-selection onto a (numerically) orthogonal state."""


class KinematicsError(WignerFramesError):
    """Superluminal or otherwise invalid boost."""


class GeometryError(WignerFramesError):
    """Event geometry does not admit the requested operation."""


class RecordError(WignerFramesError):
    """The friend's record cannot be declared."""


class UndeclarableRecordError(RecordError):
    """The environment is pure but matches no z- or x-record."""


class RecordUndefinedError(RecordError):
    """The environment is entangled with the outside, so no record exists."""


class ConfigurationError(WignerFramesError):
    """Invalid protocol configuration."""


class ConfigSyntaxError(ConfigurationError):
    """Malformed configuration document, with a line/column location."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" if line is not None else ""
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigRangeError(ConfigurationError):
    """A configuration value is well-formed but out of range."""

    def __init__(self, message, key=None, line=None, column=None):
        self.key = key
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""
