"""Exception types shared across the package."""


class QKDLabError(Exception):
    """Base class for all errors raised by qkdlab."""


class ValidationError(QKDLabError, ValueError):
    """An input violates a documented precondition."""


class CapacityError(QKDLabError):
    """An exact computation would exceed the enumeration caps."""


class SingularityError(ValidationError):
    """A formula is evaluated at a point where it diverges."""


class IncompleteTraceError(QKDLabError):
    """A pipeline trace is missing one of its oracle stages."""


class ChainViolationError(QKDLabError):
    """Eve's guessing probability decreased along the pipeline."""
