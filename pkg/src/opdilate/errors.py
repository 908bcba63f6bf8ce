"""Exception hierarchy shared by every module of the toolkit."""


class DilationError(ValueError):
    """Base class for all toolkit errors."""


class NotHermitian(DilationError):
    pass


class NoConvergence(DilationError):
    pass


class NotPSD(DilationError):
    pass


class DimensionMismatch(DilationError):
    pass


class SignatureMismatch(DilationError):
    pass


class ShapeMismatch(DilationError):
    pass


class NotPositiveDefinite(DilationError):
    pass


class RankMismatch(DilationError):
    pass


class NotUnitary(DilationError):
    pass


class NotCompletelyPositive(DilationError):
    pass


class ResidualExceeded(DilationError):
    pass


class NotPositiveEffect(DilationError):
    pass


class NotPositive(DilationError):
    pass


class UnknownAtom(DilationError, KeyError):
    pass


class NotDominating(DilationError):
    pass
