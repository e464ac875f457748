"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario, grid, or model input is structurally invalid."""


class OutOfDomainError(ValueError):
    """A query point lies outside the grid bounding box."""


class SolverError(RuntimeError):
    """A linear solve failed to reach the required residual.

    Carries the achieved relative residual so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class StabilityError(ValueError):
    """A transport step was asked to exceed the admissible time step.

    ``admissible_dt`` is the largest step the current field state allows.
    """

    def __init__(self, dt: float, admissible_dt: float):
        super().__init__(
            f"dt={dt:g} s violates the stability bound; "
            f"admissible dt is {admissible_dt:g} s"
        )
        self.admissible_dt = admissible_dt


class FitError(RuntimeError):
    """Flow fitting could not produce any usable result."""
