"""Exception hierarchy."""


class ElMetaError(Exception):
    """Base class for all package errors."""


class ValidationError(ElMetaError, ValueError):
    """Input does not satisfy the data-model invariants."""


class EmptyDataset(ValidationError):
    pass


class TooFewStudies(ValidationError):
    pass


class DegenerateInterval(ValidationError):
    pass


class MixedLevels(ValidationError):
    pass


class BadLevel(ValidationError):
    pass


class BadSampleSize(ValidationError):
    pass


class NumericalError(ElMetaError, ArithmeticError):
    """A numerical routine could not produce a result."""


class InfeasibleHull(NumericalError):
    """The constraint target is not strictly inside the convex hull."""


class NoConvergence(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoFeasibleTheta(NumericalError):
    """No parameter value gives a feasible empirical-likelihood problem."""


class BadConfig(ElMetaError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ParseError(ElMetaError, ValueError):
    def __init__(self, row, reason):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class BadFlags(ElMetaError, ValueError):
    """Command-line flag values that parse but make no sense together."""
