"""Exception hierarchy shared by all reduction routines."""


class SomorError(Exception):
    """Base class for all errors raised by :mod:`somor`."""


class NonConvergence(SomorError):
    pass


class SingularSeparation(SomorError):
    """Spectra of ``A`` and ``-A^T`` (nearly) intersect."""


class SingularE(SomorError):
    pass


class NoStabilizingSolution(SomorError):
    pass


class Overflow(SomorError):
    pass


class BranchCut(SomorError):
    """An eigenvalue lies on the closed negative real axis."""


class NotPD(SomorError):
    pass


class InvalidParams(SomorError):
    pass


class ParseError(SomorError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(SomorError):
    pass


class NotColocated(SomorError):
    pass


class SingularAtS(SomorError):
    pass


class NotModallyDamped(SomorError):
    pass


class UnstablePencil(SomorError):
    pass


class RankDeficient(SomorError):
    pass


class LureResidualLarge(SomorError):
    pass


class SignatureImbalance(SomorError):
    pass


class InterlacingViolated(SomorError):
    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


class RankDeficientBasis(SomorError):
    pass


class SingularAtPoint(SomorError):
    pass


class StagnationWithoutConvergence(SomorError):
    pass


class ToleranceNotReached(SomorError):
    pass


class ConfigError(SomorError):
    pass


class UndampedMode(SomorError, UserWarning):
    """A mode has zero real part, so its dominance is undefined."""


class TransformIllConditioned(SomorError, UserWarning):
    """The structure-recovering transformation is badly conditioned."""
