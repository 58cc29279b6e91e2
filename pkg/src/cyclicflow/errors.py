"""Exception hierarchy shared by all cyclicflow modules."""


class CyclicFlowError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CyclicFlowError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridError(CyclicFlowError, ValueError):
    """Invalid grid specification or a field that does not match its grid."""


class SolverError(CyclicFlowError, RuntimeError):
    """A linear or eigen solve failed.

    ``diagnostic`` carries whatever the failing solver could report
    (condition estimate, residual, iteration count).
    """

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class UpdateSolveError(SolverError):
    """The stationary update problem of the averaging scheme could not be solved."""


class StepError(CyclicFlowError, RuntimeError):
    """A time step did not converge; ``residuals`` holds the Newton history."""

    def __init__(self, message, residuals=(), step_index=None):
        super().__init__(message)
        self.residuals = list(residuals)
        self.step_index = step_index


class InsufficientDataError(CyclicFlowError, ValueError):
    """Too few cycles were recorded to estimate a rate."""


class ConfigError(CyclicFlowError, ValueError):
    """A scenario or sweep configuration is malformed."""


class ReportError(CyclicFlowError, OSError):
    """A report could not be produced or written."""
