"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are not conformal."""


class PreconditionError(ValueError):
    """An input violates a documented precondition (sign, symmetry, ...)."""


class NnlsCyclingError(RuntimeError):
    """The active-set solver hit its swap cap.

    The best feasible iterate found so far is kept on ``best_x``.
    """

    def __init__(self, message, best_x):
        super().__init__(message)
        self.best_x = best_x


class DegenerateInitError(RuntimeError):
    """Random initialization could not produce a usable scaling."""
