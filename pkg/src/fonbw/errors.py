"""Exception types shared across the toolkit."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DataError(ValueError):
    """Input data (CSV, series) is malformed or inconsistent."""


class DivergenceError(ArithmeticError):
    """A simulated state left the finite range guarded by the solver."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class SolverError(RuntimeError):
    """The per-step implicit solve failed to converge."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ConfigError(ValueError):
    """A run configuration is missing, unreadable or inconsistent."""


class IdentificationFailure(RuntimeError):
    """Identification finished without an acceptable candidate."""
