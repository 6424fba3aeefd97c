"""Spectral aerosol concentration in a box with partially absorbing walls."""

__version__ = "0.1.0"

from .eigenspectrum import AxisSpec, EigenSpectrum, detect_zero_mode, solve_negative_eigenvalue, \
    solve_positive_eigenvalues, solve_spectrum  # noqa: E402
from .errors import IntegrationError, OracleError, RoomAerosolError, SolverError, ValidationError  # noqa: E402
from .greens import PointSource, Room, concentration_1d, concentration_point_3d  # noqa: E402

__all__ = [
    "AxisSpec", "EigenSpectrum", "detect_zero_mode", "solve_negative_eigenvalue", "solve_positive_eigenvalues",
    "solve_spectrum", "IntegrationError", "OracleError", "RoomAerosolError", "SolverError", "ValidationError",
    "PointSource", "Room", "concentration_1d", "concentration_point_3d",
]
