"""Exception types shared across the pipeline."""


class ChoralforgeError(Exception):
    """Base class for all package errors."""


class ScoreParseError(ChoralforgeError, ValueError):
    """Malformed symbolic input (MIDI bytes or text score).

    For binary input, ``offset`` is the byte offset where parsing failed;
    for text input, ``line`` is the 1-based line number.
    """

    def __init__(self, message, offset=None, line=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class MonophonyError(ChoralforgeError, ValueError):
    """Two notes of one voice part overlap in time."""


class BankError(ChoralforgeError, ValueError):
    """Invalid sample bank: pitch coverage gap, missing zone, bad description."""


class RenderError(ChoralforgeError, ValueError):
    """A note cannot be rendered with the given bank."""


class ConfigError(ChoralforgeError, ValueError):
    """Invalid pipeline or expression configuration."""
