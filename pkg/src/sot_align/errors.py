"""Exception hierarchy shared by loaders, stages and the CLI."""


class SotAlignError(Exception):
    """Base class for all package errors."""


class InputError(SotAlignError, ValueError):
    """Bad or inconsistent user input (maps to CLI exit code 2)."""


class ParseError(InputError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class ReferentialError(InputError):
    def __init__(self, key, path=None, lineno=None):
        self.key = key
        where = f"{path}:{lineno}: " if path is not None else ""
        super().__init__(f"{where}unknown entity key {key!r}")


class DuplicationError(InputError):
    def __init__(self, key, path=None, lineno=None):
        self.key = key
        where = f"{path}:{lineno}: " if path is not None else ""
        super().__init__(f"{where}duplicate entry {key!r}")


class ShapeError(SotAlignError, ValueError):
    """Array dimensions do not agree."""


class TrainingError(SotAlignError, RuntimeError):
    """Training diverged (non-finite loss)."""


class StageError(SotAlignError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
