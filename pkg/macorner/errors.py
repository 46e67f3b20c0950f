"""Exception hierarchy for macorner.

Input-side failures subclass ValueError so callers that only know the
standard library still catch them; numerical failures subclass RuntimeError.
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .schema import SolveReport


class MaCornerError(Exception):
    """Base class for every error raised by macorner."""


# ============================================================================
# Input errors (exit code 1)
# ============================================================================


class DomainError(MaCornerError, ValueError):
    """A parameter or point lies outside the domain of an operation."""


class ExtentError(DomainError):
    """Requested evaluation points fall outside a field's grid."""


class GridError(MaCornerError, ValueError):
    """Grid parameters are invalid or two grids are incompatible."""


class BracketError(MaCornerError, ValueError):
    """Bisection endpoints do not bracket a root."""


class InsufficientDataError(MaCornerError, ValueError):
    """Too few usable samples for a fit or a trend."""


class ConvexityError(MaCornerError, ValueError):
    """A candidate subsolution is not convex on the audited region."""


class StencilSupportError(MaCornerError, ValueError):
    """A node lacks the neighbour values needed by the stencil."""


class FieldFormatError(MaCornerError, ValueError):
    """A field CSV or its metadata sidecar is malformed."""


class ConfigError(MaCornerError, ValueError):
    """A run configuration file cannot be read."""


# ============================================================================
# Numerical and consistency errors (exit code 2)
# ============================================================================


class NumericalError(MaCornerError, RuntimeError):
    """Base class for failures of a numerical method."""


class SingularityError(NumericalError):
    """A linear system is structurally or numerically singular."""


class ConvergenceError(NumericalError):
    """An iterative method hit its cap without meeting its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(NumericalError):
    """Newton and its fallbacks failed; the solve report is attached."""

    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


class ConsistencyError(MaCornerError):
    """Computed evidence contradicts a structural expectation."""

    def __init__(self, message: str, evidence: dict[str, Any] | None = None):
        super().__init__(message)
        self.evidence = evidence or {}


class ConstructionError(MaCornerError):
    """A parameter search for an auxiliary construction was exhausted."""


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, (NumericalError, ConsistencyError, ConstructionError)):
        return 2
    return 1
