"""Exception hierarchy shared by every fssk module."""


class FsskError(Exception):
    """Base class for all fssk errors."""


class DimensionError(FsskError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(FsskError, ValueError):
    """A parameter or configuration value is out of range."""


class DegenerateRowError(FsskError, ValueError):
    """A softmax row has no finite entry."""


class InvalidEpisodeError(FsskError, ValueError):
    """An episode cannot be processed (e.g. empty support mask)."""


class InvariantError(FsskError, ValueError):
    """An input violates a structural invariant (e.g. overlapping regions)."""


class ModeError(FsskError, ValueError):
    """An operation was requested in a mode that lacks its inputs."""


class FormatError(FsskError):
    """Malformed FST payload or episode manifest.

    ``offset`` is the byte position at which decoding failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
