"""Exception hierarchy shared by all degenlab modules."""


class DegenlabError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(DegenlabError, ValueError):
    """An argument has the wrong shape, sign or range."""


class PreconditionError(DegenlabError):
    """An operation was called on an object lacking a required property."""


class ResourceLimitError(DegenlabError):
    """A tensor grid or dense matrix would exceed its configured budget."""


class UnsupportedError(DegenlabError):
    """The requested combination is outside what the library implements."""


class DomainError(DegenlabError, ValueError):
    """A potential is infinite at the evaluation point."""


class NumericalFailure(DegenlabError):
    """An iterative solver did not converge.

    Attributes
    ----------
    residual : float
        Last first-order residual reached by the solver.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
