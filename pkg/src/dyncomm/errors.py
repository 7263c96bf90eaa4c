class DyncommError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DyncommError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, lineno: int):
        super().__init__(message)
        self.lineno = lineno


class MemoryBudgetError(DyncommError, MemoryError):
    pass


class NumericalError(DyncommError, ArithmeticError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class DegeneratePartitionError(DyncommError):
    """A present node has an all-zero indicator row."""


class StageError(DyncommError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class SliceError(DyncommError):
    """A per-slice step failed; ``slice`` is the 0-based slice index."""

    def __init__(self, slice_index: int, cause: BaseException):
        super().__init__(f"slice {slice_index}: {cause}")
        self.slice = slice_index
        self.cause = cause
