"""Exception hierarchy.

Validation errors (bad parameters, shapes, indices) derive from
``ValidationError``; failures of a numerical procedure on valid input
derive from ``NumericalError``. The CLI maps them to exit codes 2 and 3.
"""


class ValidationError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class DegenerateParams(ValidationError):
    pass


class RegionViolation(ValidationError):
    pass


class NegativeEigenvalue(ValidationError):
    pass


class UnknownFrequency(ValidationError):
    pass


class DegenerateFrequency(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidPair(ValidationError):
    pass


class NonDiagonalInvariant(ValidationError):
    pass


class TruncationTooSmall(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class StabilityViolation(NumericalError):
    pass


class TruncationLeak(NumericalError):
    pass


class InsufficientDecay(NumericalError):
    pass


class NoRootInRange(NumericalError):
    pass
