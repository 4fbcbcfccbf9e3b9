"""Exception hierarchy shared by every module of the package."""


class MsVarError(Exception):
    """Base class for all package errors."""


class ValidationError(MsVarError):
    """Model or input failed a structural check.

    ``location`` names the offending regime, index or JSON field so callers
    can report it without parsing the message.
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class ShapeMismatch(ValidationError):
    pass


class NonStochasticTransition(ValidationError):
    pass


class NonPositiveDefiniteCovariance(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class MissingStrike(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class NumericalError(MsVarError):
    """A numerical routine could not produce a trustworthy answer."""


class SingularPsi(NumericalError):
    pass


class RankDeficientConstraint(NumericalError):
    pass


class DegenerateKernel(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularAssetCovariance(NumericalError):
    pass


class EnumerationCapExceeded(NumericalError):
    pass


class AllZeroLikelihood(NumericalError):
    pass


class InsufficientDraws(NumericalError):
    pass


class McBudgetExceeded(NumericalError):
    pass


class ToleranceNotMet(NumericalError):
    pass
