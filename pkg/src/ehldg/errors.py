"""Exception hierarchy for the solver library."""


class EhlError(Exception):
    """Base class for every error raised by :mod:`ehldg`."""


class ParameterDomainError(EhlError, ValueError):
    """A physical input or derived group left its admissible range."""


class MeshError(EhlError, ValueError):
    pass


class MeshMismatchError(EhlError, ValueError):
    pass


class EvaluationError(EhlError, ValueError):
    """A constitutive law was evaluated outside its domain."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class FilmCollapseError(EvaluationError):
    """The film thickness became non-positive at a quadrature point."""


class ConvergenceError(EhlError, RuntimeError):
    def __init__(self, message, history=None, state=None):
        super().__init__(message)
        self.history = history or []
        self.state = state  # last iterate, when available


class LinearSolveError(EhlError, RuntimeError):
    pass


class ConfigError(EhlError, ValueError):
    pass
