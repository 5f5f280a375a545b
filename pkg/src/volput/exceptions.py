"""Exception and warning types raised by volput."""


class SpecialFunctionDomainError(ValueError):
    """Parameters outside the domain of a special-function evaluation."""


class SeriesConvergenceError(ArithmeticError):
    """A hypergeometric series failed to converge within its term budget."""


class NoAdmissibleRoot(RuntimeError):
    """No economically admissible free-boundary root was found.

    ``candidates`` holds every sign-change root that was located, so callers
    can diagnose why none was accepted.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class SingularSystem(RuntimeError):
    """The 2x2 coefficient system of a closed-form solution is singular."""


class IterationLimitError(RuntimeError):
    """An iterative solver hit its iteration budget before converging."""


class NonConvergence(RuntimeError):
    """Projected relaxation did not converge within the sweep limit."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MonotonicityLoss(RuntimeError):
    """The finite-difference operator is not an M-matrix even after upwinding."""


class EmptyExerciseSet(RuntimeError):
    """A grid solution has no node in the exercise region."""


class SimulationError(RuntimeError):
    """Path simulation or Monte Carlo diagnostics exceeded their limits."""


class ModelAdvisoryWarning(UserWarning):
    """Parameters violate a standing assumption of the closed-form theory.

    Pricing still proceeds; the warning tells the caller which assumption
    does not hold.
    """


class RegimeWarning(UserWarning):
    """The callable-put regime could not be settled by the sufficient conditions."""


class GridResolutionWarning(UserWarning):
    """A finite-difference grid is coarser than the recommended minimum."""
