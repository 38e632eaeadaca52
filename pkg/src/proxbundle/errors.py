"""Exception types shared across the solver library."""


class ProxBundleError(Exception):
    """Base class for all library errors."""


class DomainError(ProxBundleError):
    """A point lies outside dom h where a finite value was required."""


class ParameterError(ProxBundleError):
    """Invalid or inconsistent solver parameters."""


class SubproblemError(ProxBundleError):
    """The bundle subproblem solver failed to reach its gap tolerance."""

    def __init__(self, message, achieved_gap=None):
        super().__init__(message)
        self.achieved_gap = achieved_gap


class DegenerateActiveSetError(ProxBundleError):
    """No cut is active at the subproblem solution; signals an inexact solve."""


class InnerSolveError(ProxBundleError):
    """A strongly convex inner solve (Moreau oracle / witness) did not converge."""


class BudgetExhaustedError(ProxBundleError):
    """The iteration budget ran out before the stopping test was met.

    Carries the best certificate seen so far (may be None if no serious
    step happened).
    """

    def __init__(self, message, best_record=None, trace=None):
        super().__init__(message)
        self.best_record = best_record
        self.trace = trace


class AuditError(ProxBundleError):
    """A runtime audit inequality was violated while running in fail mode."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
