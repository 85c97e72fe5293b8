"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """Raised when an input breaks a documented precondition."""


class DivergenceError(RuntimeError):
    """Raised when a Markov chain leaves the numerically safe region.

    Attributes
    ----------
    step : int
        1-based index of the first offending iterate.
    """

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"chain diverged at step {self.step}")


class BoxTooSmallError(ContractViolation):
    """The brute-force prox oracle found its minimizer on the search-box boundary."""
