"""Exception hierarchy shared across the package."""


class FxBenchError(Exception):
    pass


class DataError(FxBenchError, ValueError):
    """Input data is malformed or unsuitable."""


class InsufficientDataError(DataError):
    """A series is shorter than an operation requires."""

    def __init__(self, message: str, required: int | None = None, actual: int | None = None):
        super().__init__(message)
        self.required = required
        self.actual = actual


class ModelError(FxBenchError, RuntimeError):
    """A model failed to build, train or predict."""


class DivergenceError(ModelError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
