"""Exception types shared across the package."""


class GravicutError(Exception):
    """Base class for all package errors."""


class NotInterior(GravicutError):
    """A point expected to lie strictly inside a body does not."""


class DegenerateBody(GravicutError):
    """The body is too thin (or too small) for a usable whitening frame."""


class EmptyCut(GravicutError):
    """No interior point could be found on the kept side of a cut."""


class BudgetTooSmall(GravicutError):
    """The query budget is too small for the cutting-plane parameters."""


class BudgetExhausted(GravicutError):
    """Raised when the query ledger runs dry.

    Estimators attach what they managed to compute before the budget ran
    out, so callers can still use a partial result.

    Attributes
    ----------
    partial : object
        Partial estimate (float or array), or ``None`` when no sample was
        taken.
    samples : int
        Number of observations behind ``partial``.
    """

    def __init__(self, message="query budget exhausted", partial=None, samples=0):
        super().__init__(message)
        self.partial = partial
        self.samples = samples
