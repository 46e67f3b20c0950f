"""Type definitions and enums for macorner."""

from enum import Enum, IntEnum
from typing import Literal


class Sign(str, Enum):
    """Branch selector for P_c^±, A_c^± and the sectors Q_c^±."""

    PLUS = "+"
    MINUS = "-"

    @property
    def factor(self) -> int:
        return 1 if self is Sign.PLUS else -1


class GridShape(str, Enum):
    """Truncation shapes of the lattice over [0, R]²."""

    SQUARE = "square"
    QUARTER_DISC = "quarter-disc"
    SECTOR_ANNULUS = "sector-annulus"  # masked annulus inside a plane sector


class NodeKind(IntEnum):
    """Per-node classification; the four kinds partition the index set."""

    INTERIOR = 0
    AXIS_BOUNDARY = 1
    OUTER_BOUNDARY = 2
    EXTERIOR = 3


class Statistic(str, Enum):
    """Reduction applied to |field - reference| on an arc."""

    SUP_ABS = "sup-abs"
    MEAN = "mean"


class MapDirection(str, Enum):
    """Direction of the conformal power map."""

    TO_HALF_PLANE = "toHalfPlane"
    FROM_HALF_PLANE = "fromHalfPlane"


class RegularityKind(str, Enum):
    """Vertex trichotomy."""

    C2ALPHA = "C2alpha"
    C2 = "C2"
    CONICAL = "Conical"


class ConicalVerdict(str, Enum):
    """Outcome of the minimum-eigenvalue trend along a radius ladder."""

    CONICAL = "conical"
    REGULAR = "regular"
    INDETERMINATE = "indeterminate"


class LinearMethod(str, Enum):
    """Inner linear solver used by Newton and the Laplace solver."""

    DIRECT = "direct"
    GMRES = "gmres"


class OuterData(str, Enum):
    """Outer boundary data used when a vertex record carries no sampler."""

    PBAR = "pbar"
    PUNDER = "punder"
    QUADRATIC = "quadratic"


Analysis = Literal[
    "u12-limits", "alpha", "beta", "coeff-a", "conical", "hessian-audit"
]
ALL_ANALYSES: tuple[str, ...] = (
    "u12-limits",
    "alpha",
    "beta",
    "coeff-a",
    "conical",
    "hessian-audit",
)
