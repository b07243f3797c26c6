"""Exception types shared across the package."""


class DiracLabError(Exception):
    """Base class for all package errors."""


class MeasureError(DiracLabError, ValueError):
    """Invalid charge distribution (bad weight, width, duplicate merge over cap...)."""


class SingularPointError(MeasureError):
    """Potential requested at the position of an atom."""


class ScaleError(MeasureError):
    """Mass scaling would create an atom of weight >= 1."""


class ConfigError(DiracLabError, ValueError):
    """Invalid solver, grid, basis or run configuration."""


class IntegrationError(DiracLabError, ArithmeticError):
    """Non-finite integrand value encountered during quadrature."""


class SolverError(DiracLabError, RuntimeError):
    """Eigensolver or root-finder failure."""


class GapBottomError(SolverError):
    """The first eigenvalue is at or below the bottom of the spectral gap."""


class NoBoundStateError(SolverError):
    """An operation needs a bound state but none was found."""
