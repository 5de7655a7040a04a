"""
Exception hierarchy shared by every module of the laboratory
"""
from typing import List, Optional, Sequence


class SpectraLabError(Exception):
    """Base class for all laboratory errors"""


class GridError(SpectraLabError, ValueError):
    """Invalid box, resolution or dimension mismatch"""


class BudgetExceededError(SpectraLabError, ValueError):
    """A configured node, dense or eigenpair budget would be exceeded"""


class DomainError(SpectraLabError, ValueError):
    """An argument lies outside the domain where the operation is defined"""


class KLMNViolationError(DomainError):
    """The negative part is not form small (q >= 1 for every scanned C)"""

    def __init__(self, message: str, scan: Optional[Sequence] = None):
        super().__init__(message)
        self.scan = list(scan or [])


class ConvergenceError(SpectraLabError, RuntimeError):
    """An iterative method ran out of its iteration budget"""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None, profile: Optional[Sequence] = None):
        super().__init__(message)
        self.residuals = list(residuals or [])
        self.profile = list(profile or [])


class ConfigError(SpectraLabError, ValueError):
    """Experiment configuration could not be parsed or validated"""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            message = message + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)
        super().__init__(message)


class NumericalError(SpectraLabError, RuntimeError):
    """A linear-algebra backend (LAPACK, ARPACK) failed on a well-posed input"""
