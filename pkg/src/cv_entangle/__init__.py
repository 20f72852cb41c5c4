"""Entanglement between a damped mechanical oscillator and its continuous output field."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AmbiguityError,
    ConfigError,
    ConflictError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    EntangleError,
    NoEntanglementError,
    ParameterError,
    StructureError,
)
from .gaussian import EntanglementResult, log_negativity, symplectic_eigenvalues  # noqa: F401
from .grid import GridSpec, build_grid_covariance, entanglement_grid  # noqa: F401
from .params import SystemParams, build_params  # noqa: F401
from .wienerhopf import solve_lambda  # noqa: F401
