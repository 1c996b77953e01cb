"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all lab errors."""


class ValidityError(LabError, ValueError):
    """An input violates a precondition (including surrogate validity bounds)."""


class InvariantViolation(LabError, AssertionError):
    """A mathematical assertion failed. Carries the offending instance."""

    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance or {}


class BudgetExceeded(LabError, RuntimeError):
    """A computation would exceed its configured size budget."""


def check(condition, message, **instance):
    if not condition:
        raise InvariantViolation(message, instance)
