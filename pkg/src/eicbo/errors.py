"""Exception types shared across the package.

Invalid arguments raise the builtin ``ValueError`` and I/O problems raise
``OSError``; only the failure modes that need extra context get their own
class here.
"""


class NumericFailure(RuntimeError):
    """A linear-algebra step failed even after regularization.

    ``jitter`` records the largest diagonal inflation that was attempted
    before giving up (``None`` if no jitter was applicable).
    """

    def __init__(self, message: str, jitter: float | None = None):
        super().__init__(message)
        self.jitter = jitter


class InvalidStateError(RuntimeError):
    """An operation was asked to act on a state it cannot make progress from,
    e.g. selecting a point when the evaluation budget is already spent."""


class ConsistencyError(RuntimeError):
    """An internal cross-check failed, e.g. an objective value exceeding the
    declared optimum by more than rounding slack."""


class ResourceLimitError(RuntimeError):
    """A requested computation would exceed a hard size cap."""
