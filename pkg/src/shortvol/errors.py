"""Exception types shared across the package."""


class ShortVolError(Exception):
    """Base class for errors raised by shortvol."""


class DomainError(ShortVolError, ValueError):
    """An input lies outside the domain an operation supports."""


class NumericError(ShortVolError, ArithmeticError):
    """A numerical routine (quadrature, ODE, root finder) failed."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class SolverError(NumericError):
    """A bracketed root search could not locate a sign change."""


class NoTurningSolution(SolverError):
    """No path with a single slope sign change reaches the strike."""
