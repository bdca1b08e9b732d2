"""Exception types shared across the package."""


class LandauSimError(Exception):
    """Base class for all package-specific errors."""


class NotPsd(LandauSimError):
    """A matrix expected to be positive semidefinite has an eigenvalue below
    the tolerated negative roundoff band."""


class Singular(LandauSimError):
    """A matrix required to be invertible is singular to working precision."""


class DomainError(LandauSimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularRelativeVelocity(LandauSimError):
    """A soft-potential kernel was evaluated at a relative velocity too close
    to zero for the requested exponent (the limit does not exist)."""


class NotCentered(LandauSimError):
    """An operation requiring a centered initial law received a law whose mean
    is not zero."""


class NonFinite(LandauSimError):
    """A particle state left the finite floats during integration."""

    def __init__(self, message, step=None, bad_count=None):
        super().__init__(message)
        self.step = step
        self.bad_count = bad_count


class ConfigError(LandauSimError):
    """A run configuration file or value is invalid."""


class DegenerateFit(LandauSimError):
    """A rate fit was requested on data it cannot support (too few points,
    nonpositive estimates, zero spread)."""
