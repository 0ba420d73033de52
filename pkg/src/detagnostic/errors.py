"""Exception hierarchy shared across the toolkit."""


class DetagnosticError(Exception):
    """Base class for all errors raised by this package."""


class AnnotationParseError(DetagnosticError):
    """Annotation file is not valid JSON.

    ``byte_offset`` points at the first offending byte of the input.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class ValidationError(DetagnosticError):
    """Input violates a documented invariant."""


class ReferentialIntegrityError(ValidationError):
    """A record references an id that does not exist."""


class SequencingError(DetagnosticError):
    """Epochs must arrive strictly increasing by one."""


class LifecycleError(DetagnosticError):
    """Operation not permitted in the current session/controller state."""


class SnapshotError(DetagnosticError):
    """Snapshot payload could not be decoded."""


class TemplateNotFoundError(DetagnosticError):
    """Requested model template is not registered."""
