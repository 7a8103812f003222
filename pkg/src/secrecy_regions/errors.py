"""Exception hierarchy shared by every module."""


class SecrecyError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SecrecyError, ValueError):
    """Input data violates a structural invariant (CLI exit code 2)."""


class NotStochastic(ValidationError):
    def __init__(self, row, deviation, column=None, message=None):
        self.row = row
        self.column = column
        self.deviation = float(deviation)
        if message is None:
            where = f"row {row}" if column is None else f"row {row}, column {column}"
            message = f"matrix is not row-stochastic at {where} (deviation {self.deviation:.3g})"
        super().__init__(message)


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class InvalidJoint(ValidationError):
    pass


class HypothesisViolated(SecrecyError):
    """A channel-ordering hypothesis required by a theorem does not hold (exit code 3)."""


class EmptyRegion(SecrecyError):
    pass


class CapacityExceeded(SecrecyError):
    """Codebook index space is larger than the configured memory cap."""


class EnumerationTooLarge(SecrecyError):
    pass


class DecodeFailure(SecrecyError):
    def __init__(self, reason, candidates=0):
        self.reason = reason
        self.candidates = candidates
        super().__init__(f"decoding failed: {reason} ({candidates} candidates)")
