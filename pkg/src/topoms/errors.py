"""Exception types shared across modules."""


class ConfigError(ValueError):
    """A parameter violates its configuration invariants."""


class SolverError(RuntimeError):
    """An iterative solve failed to converge.

    ``report`` is the failing :class:`~topoms.fem.SolverReport`; ``trace``
    holds whatever partial run trace existed when the failure happened.
    """

    def __init__(self, message, report=None, trace=None):
        super().__init__(message)
        self.report = report
        self.trace = trace
