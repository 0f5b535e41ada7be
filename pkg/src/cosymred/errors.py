"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 for validation/invariant failures, 2 for input errors and 3 for numeric
failures.
"""


class CosymError(Exception):
    exit_code = 1


class InvariantError(CosymError):
    """A checked geometric identity does not hold."""


class InputError(CosymError):
    exit_code = 2


class NumericError(CosymError):
    exit_code = 3


class ToleranceAmbiguity(NumericError):
    """A singular value falls inside the rank-decision ambiguity band."""


class PreconditionViolation(InvariantError):
    pass


class DomainGuardViolation(InvariantError):
    def __init__(self, message, points=None, step=None):
        super().__init__(message)
        self.points = points
        self.step = step


class SingularFlat(NumericError):
    pass


class NonConstant(InvariantError):
    pass


class NotInvariant(InvariantError):
    pass


class FlowMismatch(InvariantError):
    pass


class TangencyDetected(InvariantError):
    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = [] if points is None else points


class NoConvergence(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class SliceNotTransverse(NumericError):
    pass


class NonFinite(NumericError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyLevelSet(CosymError):
    """The requested momentum level has no points in the guarded domain.

    This is an outcome rather than a failure; the pipeline reports it and
    exits successfully.
    """

    exit_code = 0

    def __init__(self, message, mu=None, reason=""):
        super().__init__(message)
        self.mu = mu
        self.reason = reason


class ParseError(InputError):
    def __init__(self, message, line=None, key=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(InvariantError):
    def __init__(self, message, invariant=""):
        super().__init__(message)
        self.invariant = invariant
