"""Exception taxonomy shared by every module.

Each exception carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses without inspecting messages.
"""


class WFDelayError(Exception):
    exit_code = 4


class InvalidArgument(WFDelayError, ValueError):
    exit_code = 2


class SuperluminalVelocity(WFDelayError, ValueError):
    exit_code = 4


class SingularSeparation(WFDelayError, ArithmeticError):
    exit_code = 4


class OutOfDomain(WFDelayError, ValueError):
    """A query fell outside the covered time interval."""

    exit_code = 4

    def __init__(self, message, interval=None, side=None):
        super().__init__(message)
        self.interval = interval
        self.side = side


class FitFailure(WFDelayError):
    exit_code = 4


class MonotonicityViolation(WFDelayError):
    exit_code = 4


class IntervalMismatch(WFDelayError):
    exit_code = 4


class SmoothnessViolation(WFDelayError):
    exit_code = 4

    def __init__(self, message, mismatches=None):
        super().__init__(message)
        self.mismatches = mismatches or []


class InvalidWorldLine(WFDelayError):
    exit_code = 4


class InternalInvariantViolation(WFDelayError):
    exit_code = 4


class InvalidAnchor(WFDelayError):
    exit_code = 2


class GuardSpeed(WFDelayError):
    exit_code = 3


class ConstructionInconsistency(WFDelayError):
    exit_code = 4


class ValidationFailure(WFDelayError):
    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureFailure(WFDelayError):
    exit_code = 4

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class NoSolutionInWindow(WFDelayError):
    exit_code = 4
