"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A physical parameter lies outside its valid domain."""


class NumericalToleranceError(RuntimeError):
    """A quadrature or root-find did not reach the requested accuracy."""


class StiffnessError(RuntimeError):
    """The ODE integrator could not advance (step size underflow)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class FitError(RuntimeError):
    """A least-squares fit failed or the data are degenerate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Invalid scenario/parameter configuration."""

    def __init__(self, message, field=None, line=None):
        where = ""
        if field is not None:
            where += f" [field: {field}]"
        if line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)
        self.field = field
        self.line = line


class ShotError(RuntimeError):
    """A Monte Carlo shot failed; carries the shot index."""

    def __init__(self, message, shot_index):
        super().__init__(f"shot {shot_index}: {message}")
        self.shot_index = shot_index
