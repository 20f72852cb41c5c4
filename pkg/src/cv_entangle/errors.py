"""Exception hierarchy shared by the library and the command line."""


class EntangleError(Exception):
    """Base class for every error raised by cv_entangle."""


class ParameterError(EntangleError, ValueError):
    """Physical parameters outside their admissible range."""


class ConflictError(ParameterError):
    """Two inputs describe the same quantity inconsistently."""


class StructureError(EntangleError, ValueError):
    """Malformed covariance matrix (odd size, asymmetric, bad index)."""


class DomainError(EntangleError, ValueError):
    """Argument outside the domain of a function (negative time, etc.)."""


class DegeneracyError(EntangleError, ArithmeticError):
    """A numerical construction hit a singular or degenerate configuration."""


class ConfigError(EntangleError, ValueError):
    """Invalid numerical configuration (grid, simulation, CLI input)."""


class ConvergenceError(EntangleError, RuntimeError):
    """An iterative procedure did not reach its tolerance.

    The ``trace`` attribute carries whatever history was collected.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class AmbiguityError(EntangleError, RuntimeError):
    """More than one root was found where a single one was expected."""

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = list(roots)


class NoEntanglementError(EntangleError, RuntimeError):
    """The requested quantity needs an entangled starting state."""
