"""Exception types shared across the package."""


class HFCertError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HFCertError, ValueError):
    """Input data is malformed, non-finite or has mismatched dimensions."""


class ConstructionError(HFCertError):
    """A requested object cannot be built from the given data.

    ``clause`` names the condition that could not be satisfied.
    """

    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class SingularityError(HFCertError):
    """A factorization that should never fail did fail."""


class ConsistencyError(HFCertError):
    """Two independent evaluations of the same quantity disagree."""


class HypothesisError(HFCertError):
    """A quantitative precondition (for example eps0 < 1) is violated."""


class SolverError(HFCertError):
    """The Newton iteration could not continue.

    ``trace`` carries the iterates computed before the failure, if any.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
