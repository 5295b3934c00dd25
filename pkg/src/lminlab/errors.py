"""Exception types shared across the package."""


class LminlabError(Exception):
    """Base class for package errors."""


class InvalidParameterError(LminlabError, ValueError):
    """A scalar parameter is outside its documented domain."""


class InvalidInputError(LminlabError, ValueError):
    """An array/matrix input is malformed (wrong shape, non-finite, empty)."""


class UnsupportedQueryError(LminlabError, RuntimeError):
    """The requested analytic quantity has no closed/quadrature form for this family."""


class NoConvergenceError(LminlabError, RuntimeError):
    """An iterative solver hit its iteration cap; carries diagnostics."""

    def __init__(self, message: str, iterations: int, last_estimate: float):
        super().__init__(f"{message} (iterations={iterations}, last_estimate={last_estimate!r})")
        self.iterations = iterations
        self.last_estimate = last_estimate


class BudgetExceededError(LminlabError, RuntimeError):
    """An exact-enumeration request is too large for the configured budget."""


class CalibrationUnavailableError(LminlabError, RuntimeError):
    """Too few usable rows to calibrate a constant."""


class ConfigError(LminlabError, ValueError):
    """A config file has unknown keys, missing sections, or unparsable values."""
