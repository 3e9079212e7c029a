"""Exception hierarchy; the CLI maps each class to its own exit status."""


class RbnsimError(Exception):
    """Base class for all package errors."""


class PreconditionError(RbnsimError, ValueError):
    """An input violates an operation's precondition."""


class ConvergenceError(RbnsimError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class GenerationError(RbnsimError, RuntimeError):
    """Graph generation exhausted its retry budget.

    ``degree_retries`` and ``matching_retries`` record how many draws were
    rejected before giving up.
    """

    def __init__(self, message: str, degree_retries: int = 0, matching_retries: int = 0):
        super().__init__(message)
        self.degree_retries = degree_retries
        self.matching_retries = matching_retries


class OracleCapError(RbnsimError, ValueError):
    """Exact enumeration was requested beyond the node-count cap."""


class MemoCapError(RbnsimError, MemoryError):
    """A Boolean-function memo grew past its configured cap."""
