"""Exception types shared across the package."""


class TowergenError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(TowergenError):
    pass


class DimensionOverflow(TowergenError):
    pass


class EigenvalueNearThreshold(TowergenError):
    pass


class IndexOutOfRange(TowergenError):
    pass


class StrictModeViolation(TowergenError):
    pass


class InsufficientSubrank(TowergenError):
    pass


class DegenerateWitness(TowergenError):
    pass


class NoSpectralGap(TowergenError):
    pass


class NonConvergence(TowergenError):
    pass


class LadderBreakdown(TowergenError):
    pass


class StabilizationFailed(TowergenError):
    pass


class SubrankTooSmall(TowergenError):
    pass


class CapExceeded(TowergenError):
    """Raised when span closure hits its word budget before stabilizing.

    Carries the partial basis so callers can inspect how far the closure got.
    """

    def __init__(self, message, partial_basis=None):
        super().__init__(message)
        self.partial_basis = partial_basis


class ConfigInvalid(TowergenError):
    """Raised for configs that fail schema validation; names the offending path."""

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path
