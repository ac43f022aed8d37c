"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LabError, ValueError):
    """Invalid parameter, argument, or run configuration."""


class DegenerateSimilarity(LabError):
    """The similarity transform is undefined (a hopping coefficient vanishes).

    Raised for alpha = 0, where b_0 = 0 makes the diagonal rescaling
    singular.  Callers should fall back to direct time integration.
    """


class NumericalFailure(LabError):
    """An iterative numerical procedure failed to converge.

    The optional ``index`` records which eigenpair, grid point, or
    bracket failed.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class IntegrationFailure(LabError):
    """Time integration produced a non-finite value.

    ``time`` holds the time at which the first NaN or overflow appeared.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class UnsupportedGrid(LabError):
    """The operation needs a grid shape it did not get (e.g. even N)."""


class PhaseError(LabError):
    """A phase-specific quantity was requested in the wrong phase."""


class DivergedError(LabError):
    """A closed-form solution was evaluated at or past its divergence time."""
