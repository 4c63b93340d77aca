class LabError(Exception):
    """Base class for every error raised by the knapsack lab."""


class ArgumentError(LabError, ValueError):
    """An operation was called with arguments outside its domain."""


class SizeLimitError(LabError):
    """An oracle refused an instance that is too large for it."""


class SolverError(LabError):
    """A numerical solver failed (no bracket, no convergence)."""


class PreconditionError(LabError):
    """The operation is undefined for this input."""


class DatasetError(LabError):
    """
    A data file could not be parsed.

    Args:
        message (str): What went wrong.
        line (int): 1-based line number in the offending file, if known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VerificationError(LabError):
    """
    A closed-form value and its simulated counterpart disagree.

    Args:
        message (str): Summary of the mismatch.
        table: The verification table that failed, for inspection.
    """

    def __init__(self, message, table=None):
        self.table = table
        super().__init__(message)


class ConsistencyError(VerificationError):
    """An internal invariant (e.g. total probability mass) does not hold."""


VALIDATION_ERRORS = (ArgumentError, SizeLimitError, PreconditionError, DatasetError)
INTERNAL_ERRORS = (VerificationError, SolverError)
