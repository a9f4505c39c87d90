"""Exception hierarchy shared by all intentbench modules."""


class IntentBenchError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(IntentBenchError):
    """Operands have incompatible shapes or lengths."""


class ArgumentError(IntentBenchError):
    """An argument is outside its documented domain."""


class NumericError(IntentBenchError):
    """A computation produced or received a non-finite value."""


class ConvergenceError(IntentBenchError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class ParseError(IntentBenchError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DataError(IntentBenchError):
    """A dataset is unusable (empty, mislabeled, inconsistent)."""


class TrainingError(IntentBenchError):
    """Training cannot proceed (e.g. a single-class label set)."""
