"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant.

    ``violation`` carries the magnitude of the worst violated constraint when
    one is meaningful (e.g. the most negative eigenvalue of a would-be
    density matrix).
    """

    def __init__(self, message: str, violation: float | None = None):
        super().__init__(message)
        self.violation = violation


class InfeasibleBudgetError(ValidationError):
    """A closed-form perturbation solver was called outside its validity
    regime; the numerical solver handles these budgets."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to converge within its iteration budget."""
