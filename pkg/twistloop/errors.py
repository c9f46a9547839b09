"""
Exception hierarchy for twistloop.

Every error is a ``ValueError`` so callers that only know the generic
contract keep working; the subclasses carry the diagnostics of the
failing computation as attributes.
"""

from typing import Optional, Sequence, Tuple


def _restore(cls, args, state):
    error = cls.__new__(cls)
    error.args = args
    error.__dict__.update(state)
    return error


class TwistLoopError(ValueError):
    """Base class of all twistloop errors."""

    def __reduce__(self):
        # subclasses take extra required arguments; rebuild from state instead
        return _restore, (type(self), self.args, self.__dict__)


class RejectionError(TwistLoopError):
    """A mathematically meaningful rejection (CLI exit code 2)."""


class SizeMismatch(TwistLoopError):
    """Matrix sizes of two operands differ."""


class SingularSample(TwistLoopError):
    """A loop is not invertible at one of its sample points."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class TruncationResidual(TwistLoopError):
    """Truncating to a degree window discarded more than the tolerance."""

    def __init__(self, message: str, residual: float, tol: float):
        super().__init__(message)
        self.residual = residual
        self.tol = tol


class AmbiguousWinding(TwistLoopError):
    """The sampled argument of det x does not resolve an integer winding."""


class ParameterViolation(TwistLoopError):
    """A catalog or run parameter is outside its admissible range."""


class FormatError(TwistLoopError):
    """A loop, form or frame file does not parse."""


class NotInBigCell(RejectionError):
    """The Birkhoff Toeplitz system is singular: no splitting with D = I."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ResidualTooLarge(TwistLoopError):
    """The factorization solved but does not reproduce its input."""

    def __init__(self, message: str, residual: float, tol: float):
        super().__init__(message)
        self.residual = residual
        self.tol = tol


class FormViolation(TwistLoopError):
    """The input loop is not fixed by the real form."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class FactorFormViolation(TwistLoopError):
    """A Birkhoff factor left the real form (numerical breakdown)."""

    def __init__(self, message: str, residuals: Tuple[float, float]):
        super().__init__(message)
        self.residuals = residuals


class WrongSidedInput(TwistLoopError):
    """A one-sided loop was expected but the window has the wrong sign."""


class NotInForm(TwistLoopError):
    """Iwasawa input is not fixed by the form or tau does not commute."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class BirkhoffSingular(RejectionError):
    """The Birkhoff step inside an Iwasawa splitting failed."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class LogBranchFailure(RejectionError):
    """The constant obstruction has spectrum on the closed negative axis."""

    def __init__(self, message: str, spectrum: Sequence[complex]):
        super().__init__(message)
        self.spectrum = list(spectrum)


class SymmetryResidual(TwistLoopError):
    """A symmetry forced by tau-invariance failed numerically."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class NonCanonical(TwistLoopError):
    """Factors cannot be brought to the principal-log normalization."""


class NotConstant(TwistLoopError):
    """Two z-factors of the same loop differ by a non-constant loop."""

    def __init__(self, message: str, variation: float):
        super().__init__(message)
        self.variation = variation


class NoAbelianFamily(TwistLoopError):
    """More commuting vacuum generators requested than exist."""


class NormCertificateFailure(TwistLoopError):
    """An extracted sphere point is not real or not of unit length."""


class SignatureFailure(TwistLoopError):
    """The invariant form on the circle fibre has the wrong signature."""


class DegenerateMetric(TwistLoopError):
    """The induced metric is degenerate (non-immersed points)."""


class GridPointFailure(TwistLoopError):
    """A per-point computation on a frame grid failed."""

    def __init__(self, message: str, point: Tuple[int, ...], cause: Exception):
        super().__init__(message)
        self.point = point
        self.cause = cause
