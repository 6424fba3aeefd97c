"""Exception hierarchy shared by the solver modules and the CLI."""


class RoomAerosolError(Exception):
    """Base class for all package errors."""


class ValidationError(RoomAerosolError, ValueError):
    """Invalid input geometry, parameters or configuration."""


class SolverError(RoomAerosolError, RuntimeError):
    """A root finder or series evaluation could not produce a finite answer."""


class IntegrationError(SolverError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate and its error bound are kept on the instance so
    callers can decide whether the result is still usable.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class OracleError(SolverError):
    """The finite-difference oracle failed (singular solve or non-finite field)."""
