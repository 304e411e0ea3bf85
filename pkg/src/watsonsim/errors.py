"""Exception types shared across the package."""


class InputDomainError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DataError(Exception):
    """Raised when a dataset, image file, or parameter file cannot be used.

    Carries the offending path when one is known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path is not None:
            message = f"{message} [{path}]"
        super().__init__(message)


class ValidationError(DataError):
    """Raised when loaded parameters violate their constraints."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces a non-finite intermediate."""


class TrainingError(NumericalError):
    """Raised when training aborts; names the epoch and batch."""

    def __init__(self, message: str, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
