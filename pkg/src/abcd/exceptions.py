class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


class SplitTooSmallError(DomainError):
    """A window split leaves fewer than two observations on one side."""


class NoSplitsError(DomainError):
    pass


class InsufficientDataError(DomainError):
    """Too few observations to fit an encoder-decoder model."""


class SeverityUndefinedError(DomainError):
    pass


class UndefinedCorrelationError(ValueError):
    """Rank correlation requested on fewer than two points or constant ranks."""
