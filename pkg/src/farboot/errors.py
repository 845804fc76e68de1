"""Exception types shared across the package."""


class FarbootError(Exception):
    """Base class for package errors."""


class GridMismatchError(FarbootError, ValueError):
    """Two functions live on different grids."""


class ConfigurationError(FarbootError, ValueError):
    """A model, estimator or experiment configuration is invalid."""


class DegenerateSampleError(FarbootError):
    """The sample cannot support the requested computation (e.g. empty residual pool)."""


class NumericalError(FarbootError, ArithmeticError):
    """A numerical routine did not converge."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedCaseError(FarbootError, ValueError):
    """The inputs fall outside the supported cases of an algorithm."""
