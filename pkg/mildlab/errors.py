"""
Exception hierarchy shared by the library and the CLI exit-code contract.
"""

from typing import Optional, Sequence


class MildlabError(Exception):
    """Base class for all mildlab errors."""


class InvalidArgumentError(MildlabError, ValueError):
    """An operation received arguments outside its domain (bad grid, negative time, ...)."""


class ConfigurationError(MildlabError, ValueError):
    """A noise, kernel or coefficient configuration violates its invariants."""


class ScenarioLoadError(ConfigurationError):
    """A scenario file could not be parsed or validated."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConvergenceError(MildlabError, RuntimeError):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(
        self,
        message: str,
        trace: Sequence[float] = (),
        path_index: Optional[int] = None,
    ):
        self.message = message
        self.trace = tuple(float(value) for value in trace)
        self.path_index = path_index
        super().__init__(message, self.trace, path_index)

    def __str__(self) -> str:
        if self.path_index is None:
            return self.message
        return f"path {self.path_index}: {self.message}"


class IncompatibleEnsembleError(InvalidArgumentError):
    """Ensembles cannot be compared (different scenario, seed policy or shape)."""
