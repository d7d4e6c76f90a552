"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid static configuration (dimension out of range, bad parameters)."""


class UsageError(ValueError):
    """Operands that cannot be combined, e.g. multivectors of different dimension."""


class DomainError(ValueError):
    """Evaluation at a point where a field, weight or multiplier is singular."""


class PreconditionError(ValueError):
    """A documented precondition does not hold (support leaks out of the domain, ...)."""
