"""Shared exception types.

InputError subclasses map to CLI exit code 2 (bad input / usage); anything
else that escapes is an internal error (exit code 1).
"""


class InstrembedError(Exception):
    pass


class InputError(InstrembedError):
    pass


class ParseError(InputError):
    """A corpus / pair / table file failed to parse. Carries the 1-based line."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DuplicateIdError(InputError):
    pass


class VectorFormatError(InputError):
    """A binary vector or head file failed structural validation.

    offset is the byte position at which validation failed.
    """

    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path} at byte {offset}: {message}")


class MissingIdError(InputError):
    pass
