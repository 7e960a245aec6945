"""Exception types raised by pstsize."""


class PstError(Exception):
    """Base class for all pstsize errors."""


class DomainError(PstError, ValueError):
    """An argument lies outside the domain of the function."""


class ConfigurationError(PstError, ValueError):
    """A run parameter (replications, grid, field) is unusable."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InfeasibleLayoutError(DomainError):
    """Rounding the allocation would leave an arm empty."""


class InfeasibleMomentsError(DomainError):
    """Requested prior moments cannot be matched by the prior family."""


class NumericDegeneracyError(PstError, ArithmeticError):
    """A density or normalizer collapsed to zero or became non-finite."""


class InfeasibleTargetError(PstError):
    """A PST target is at or above the limiting PST as n grows without bound."""

    def __init__(self, target, limit, kind="psi"):
        super().__init__(
            f"target {kind}={target:g} is unreachable: the PST is bounded "
            f"above by the prior probability of superiority {limit:.4f}"
        )
        self.target = target
        self.limit = limit
        self.kind = kind
