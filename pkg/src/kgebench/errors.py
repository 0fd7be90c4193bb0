"""Exception types shared across the package."""


class KgeError(Exception):
    """Base class for errors raised by this package."""


class DatasetNotFoundError(KgeError, FileNotFoundError):
    """A dataset directory or one of its split files is missing."""


class TripleParseError(KgeError, ValueError):
    """A dataset line could not be parsed as a triple.

    Carries the offending file and 1-based line number.
    """

    def __init__(self, message: str, path: str, line_no: int):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no
