"""Exception types shared across the solver modules."""


class StefanPmeError(Exception):
    """Base class for all package errors."""


class OutOfTube(StefanPmeError):
    """Point lies outside the tubular neighborhood of the interface."""


class NotDiffeomorphism(StefanPmeError):
    """Front deviation violates the diffeomorphism conditions."""


class DomainError(StefanPmeError):
    """Input outside the mathematical domain of an operation."""


class DegenerateInput(StefanPmeError):
    """Input makes the requested quantity undefined (e.g. 0/0 ratio)."""


class LinearSolveFailure(StefanPmeError):
    """A time-step linear system could not be solved."""


class ShapeMismatch(StefanPmeError):
    """Array shapes inconsistent with the grid description."""


class NotContracting(StefanPmeError):
    """Inner fixed-point iteration failed to contract (horizon too large)."""


class OuterNotContracting(StefanPmeError):
    """Outer fixed-point iteration failed to contract."""


class IntegrationFailure(StefanPmeError):
    """ODE/quadrature integration did not reach the requested tolerance."""


class CompatibilityError(StefanPmeError):
    """Data violates the first-order compatibility conditions."""


class ConfigError(StefanPmeError):
    """Invalid or missing configuration key; message names the key path."""
