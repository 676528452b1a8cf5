"""Exception hierarchy shared across the package."""


class CascadeError(Exception):
    """Base class for every error raised by ucascade."""


class InvalidScore(CascadeError, ValueError):
    pass


class InvalidInput(CascadeError, ValueError):
    pass


class MalformedDistribution(CascadeError, ValueError):
    pass


class NoLabelTokens(CascadeError, ValueError):
    pass


class InvalidEstimate(CascadeError, ValueError):
    pass


class InsufficientEnsemble(CascadeError, ValueError):
    pass


class EstimatorMismatch(CascadeError, ValueError):
    pass


class EmptyValidationSet(CascadeError, ValueError):
    pass


class EmptyPartition(CascadeError, ValueError):
    pass


class DegeneratePartition(CascadeError, ValueError):
    pass


class InvalidHyperparameter(CascadeError, ValueError):
    pass


class UnsupportedScale(CascadeError, ValueError):
    pass


class EmptyText(CascadeError, ValueError):
    pass


class InvalidCount(CascadeError, ValueError):
    pass


class ShapeError(CascadeError, ValueError):
    pass


class ScaleError(CascadeError, ValueError):
    pass


class EmptyEvaluationSet(CascadeError, ValueError):
    pass


class UndefinedCorrelation(CascadeError, ValueError):
    pass


class JoinError(CascadeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SchemaError(CascadeError, ValueError):
    pass


class MissingRecord(CascadeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class CapabilityError(CascadeError):
    pass


class ParseError(CascadeError):
    pass


class BackendError(CascadeError):
    """A backend call failed.

    ``trace`` holds the partially filled cascade trace when the failure
    happened mid-cascade; ``attempts`` and ``status`` describe the last
    transport attempt for remote backends.
    """

    def __init__(self, message, *, trace=None, attempts=None, status=None):
        super().__init__(message)
        self.trace = trace
        self.attempts = attempts
        self.status = status
