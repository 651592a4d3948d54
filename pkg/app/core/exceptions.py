"""
Exception hierarchy for the space-time finite element library.

Every error raised on purpose by the package derives from StfemError, so the
CLI can map library failures to exit codes without catching unrelated bugs.
"""

from typing import Optional


class StfemError(Exception):
    """Base class for all library errors."""


class InvalidInputError(StfemError, ValueError):
    """Rejected input: zero divisions, degenerate extents, malformed arrays."""


class UnsupportedOrderError(InvalidInputError):
    """Requested polynomial order / dimension pair is not implemented."""

    def __init__(self, order: int, dim: Optional[int] = None):
        self.order = order
        self.dim = dim
        where = f" in dimension {dim}" if dim is not None else ""
        super().__init__(f"unsupported order r={order}{where}")


class MeshConsistencyError(StfemError):
    """The mesh violates conformity or boundary classification rules."""


class DegenerateElementError(StfemError):
    """A simplex with (numerically) vanishing volume."""

    def __init__(self, element: int, det: float, threshold: float):
        self.element = element
        self.det = det
        self.threshold = threshold
        super().__init__(
            f"element {element} is degenerate: |det B| = {det:.3e} < {threshold:.3e}"
        )


class InvalidCoefficientError(StfemError, ValueError):
    """Coefficient data outside the admissible set (eps <= 0, nonsymmetric D, ...)."""


class CoefficientOutOfRangeError(StfemError):
    """Exponential weights that cannot be represented even after centering."""

    def __init__(self, element: Optional[int], exponent: float):
        self.element = element
        self.exponent = exponent
        where = f"element {element}: " if element is not None else ""
        super().__init__(
            f"{where}exponential weight exponent {exponent:.1f} exceeds the representable range"
        )


class BasisConstructionError(StfemError):
    """Rank-deficient embedding matrix or failed duality check."""


class UnisolvenceError(StfemError):
    """P*ZP is singular or too ill-conditioned to recover the flux."""

    def __init__(self, condition: float, element: Optional[int] = None):
        self.condition = condition
        self.element = element
        where = f"element {element}: " if element is not None else ""
        super().__init__(f"{where}P*ZP condition estimate {condition:.3e} exceeds 1e12")


class SingularMatrixError(StfemError):
    """Dense factorization hit a vanishing pivot or failed its residual check."""


class ConfigError(StfemError):
    """Configuration file or CLI options could not be loaded or validated."""


class ExportError(StfemError):
    """Writing or reading an output artifact failed."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
