"""Exception types shared across the package."""


class DomainError(ValueError):
    """Evaluation point outside the domain of a piecewise polynomial."""


class ConditioningError(ArithmeticError):
    """A linear system was rejected as numerically singular.

    Attributes:
        cond: condition estimate of the rejected system (``inf`` when the
            knots themselves were rejected before assembly).
        knots: the offending knot vector.
    """

    def __init__(self, message, cond=float("inf"), knots=None):
        super().__init__(message)
        self.cond = cond
        self.knots = knots


class ConvergenceError(RuntimeError):
    """The LSE solver did not meet its tolerance within the iteration budget.

    Attributes:
        best: the best iterate found (an ``LseFit``).
        violation: its worst Fenchel violation.
    """

    def __init__(self, message, best=None, violation=float("nan")):
        super().__init__(message)
        self.best = best
        self.violation = violation
