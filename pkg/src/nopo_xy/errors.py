"""Exception hierarchy shared by the library and the command line."""


class NopoXYError(Exception):
    pass


class SpecError(NopoXYError, ValueError):
    """Invalid arguments, invalid experiment specs or failed stability checks."""

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalError(NopoXYError, ArithmeticError):
    """Divergence, non-finite state, truncation failures."""

    def __init__(self, message: str, step: int | None = None) -> None:
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class DataError(NopoXYError, ValueError):
    """Sample sets that cannot support the requested statistic."""
