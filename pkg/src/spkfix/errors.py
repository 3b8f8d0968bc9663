"""Exception hierarchy shared across the package."""


class SpkfixError(Exception):
    """Base class for all package errors."""


class ValidationError(SpkfixError, ValueError):
    """A value violates a data-model invariant."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


class ParseError(SpkfixError, ValueError):
    """Input text or file content does not follow the expected grammar.

    ``location`` is a 1-based line number for files and a 0-based token
    offset for transcript strings.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class ConfigError(SpkfixError, ValueError):
    """Invalid or missing configuration."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message if key is None else f"{key}: {message}")


class BackendError(SpkfixError, RuntimeError):
    """The language-model backend failed (possibly transiently)."""


class ProtocolError(BackendError):
    """The backend answered, but the answer breaks the scoring contract."""


class DecodeError(SpkfixError, RuntimeError):
    """Decoding of one transcript failed.

    ``partial`` holds the tokens emitted before the failure.
    """

    def __init__(self, message, partial=(), session_id=None, chunk_index=None):
        self.partial = tuple(partial)
        self.session_id = session_id
        self.chunk_index = chunk_index
        where = []
        if session_id is not None:
            where.append(f"session={session_id}")
        if chunk_index is not None:
            where.append(f"chunk={chunk_index}")
        if where:
            message = f"{message} [{' '.join(where)}]"
        super().__init__(message)
