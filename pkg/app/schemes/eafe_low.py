"""
Lowest-order exponentially fitted (Scharfetter-Gummel / EAFE) assembly.

With coefficients frozen at the element barycenter, q = D^-1 b and the local
diffusion matrix d^T, the local matrix is

    [A_T]_ji = d_ji B(q . (y_i - y_j))                    i != j
    [A_T]_jj = -sum_{i != j} d_ji B(q . (y_j - y_i))

where B(s) = s / (e^s - 1). For b = e_n (heat equation) the edge arguments
reduce to (t_i - t_j) / eps.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from app.core.exceptions import InvalidCoefficientError
from app.fem.geometry import (
    ElementGeometry,
    GeometryBatch,
    batch_geometry,
    local_diffusion_matrices,
    local_diffusion_matrix,
)
from app.fem.lagrange import build_dofmap
from app.mesh.models import BoundaryRole, SimplicialMesh
from app.problems.models import AnyProblem, StationaryProblem, as_stationary
from app.schemes.common import (
    AssembledSystem,
    finish_system,
    load_vectors,
    mass_matrices,
    outflow_matrix,
    require_classified,
)

logger = logging.getLogger(__name__)

_SERIES_LIMIT = 1e-8
_UNDERFLOW_LIMIT = 500.0


def _bernoulli_nonneg(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    small = s < _SERIES_LIMIT
    large = s > _UNDERFLOW_LIMIT
    mid = ~(small | large)
    out[small] = 1.0 - s[small] / 2.0 + s[small] ** 2 / 12.0
    out[mid] = s[mid] / np.expm1(s[mid])
    out[large] = s[large] * np.exp(-s[large])
    return out


def bernoulli(s):
    """
    B(s) = s / (e^s - 1), B(0) = 1, evaluated without cancellation or overflow.
    Negative arguments use B(s) = -s + B(-s).
    """
    s_arr = np.asarray(s, dtype=float)
    flat = np.atleast_1d(s_arr).ravel()
    out = np.empty_like(flat)
    neg = flat < -_SERIES_LIMIT
    out[~neg] = _bernoulli_nonneg(flat[~neg])
    out[neg] = -flat[neg] + _bernoulli_nonneg(-flat[neg])
    out = out.reshape(np.atleast_1d(s_arr).shape)
    return float(out[0]) if s_arr.ndim == 0 else out


@dataclass(frozen=True)
class EafeCoefficients:
    """Element-frozen coefficients: D (SPD), b, q = D^-1 b and gamma."""
    D: np.ndarray
    b: np.ndarray
    gamma: float = 0.0
    q: np.ndarray = field(init=False)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if D.shape != (b.size, b.size):
            raise InvalidCoefficientError(f"D has shape {D.shape}, b has size {b.size}")
        if not np.allclose(D, D.T, rtol=1e-12, atol=1e-14 * np.abs(D).max()):
            raise InvalidCoefficientError("D must be symmetric")
        if self.gamma < 0:
            raise InvalidCoefficientError(f"gamma must be non-negative, got {self.gamma}")
        try:
            np.linalg.cholesky(D)
        except np.linalg.LinAlgError:
            raise InvalidCoefficientError("D must be positive definite (eps > 0)") from None
        q = np.linalg.solve(D, b)
        if not np.all(np.isfinite(q)):
            raise InvalidCoefficientError("q = D^-1 b is not finite")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "q", q)

    @classmethod
    def space_time(cls, K, beta, eps: float, gamma: float = 0.0) -> "EafeCoefficients":
        """D_eps = diag(K, eps), b = (beta, 1)."""
        if not eps > 0:
            raise InvalidCoefficientError(f"eps must be positive, got {eps}")
        K = np.atleast_2d(np.asarray(K, dtype=float))
        ds = K.shape[0]
        D = np.zeros((ds + 1, ds + 1))
        D[:ds, :ds] = K
        D[ds, ds] = eps
        return cls(D=D, b=np.append(np.asarray(beta, dtype=float).ravel(), 1.0), gamma=gamma)


def eafe_matrices(coords: np.ndarray, dmat: np.ndarray, q: np.ndarray) -> np.ndarray:
    """
    Batched local EAFE matrices from vertex coordinates (E, k, n), diffusion
    matrices (E, k, k) and fitting vectors (E, n).
    """
    qy = np.einsum("ekd,ed->ek", coords, q)
    S = qy[:, None, :] - qy[:, :, None]  # S[e, j, i] = q . (y_i - y_j)
    k = coords.shape[1]
    off = ~np.eye(k, dtype=bool)
    A = np.where(off, dmat * bernoulli(S), 0.0)
    # d_jj = -sum_{i != j} d_ji, so this is the diagonal rule written as a correction
    correction = np.where(off, dmat * (bernoulli(-S) - 1.0), 0.0).sum(axis=2)
    idx = np.arange(k)
    A[:, idx, idx] = dmat[:, idx, idx] - correction
    return A


def local_eafe_matrix(geom: ElementGeometry, coeff: EafeCoefficients) -> np.ndarray:
    dmat = local_diffusion_matrix(geom, coeff.D)
    return eafe_matrices(geom.vertex_coords[None], dmat[None], coeff.q[None])[0]


def frozen_coefficients(stationary: StationaryProblem, geometry: GeometryBatch):
    """D, b and q = D^-1 b evaluated at the element barycenters."""
    D = stationary.diffusion_at(geometry.barycenters)
    b = stationary.convection_at(geometry.barycenters)
    if not np.allclose(D, np.swapaxes(D, 1, 2), rtol=1e-12, atol=0.0):
        raise InvalidCoefficientError("diffusion must be symmetric")
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError:
        raise InvalidCoefficientError("diffusion must be positive definite on every element (eps > 0)") from None
    q = np.linalg.solve(D, b[..., None])[..., 0]
    return D, b, q


def assemble_eafe(mesh: SimplicialMesh, problem: AnyProblem, lump_mass: bool = False) -> AssembledSystem:
    """
    Global EAFE system: element matrices, gamma mass term, the outflow term
    int (b . n) u v on OUTFLOW_FINAL facets (unless they are Dirichlet) and
    Dirichlet elimination.
    """
    require_classified(mesh)
    stationary = as_stationary(problem)
    geometry = batch_geometry(mesh)
    D, _, q = frozen_coefficients(stationary, geometry)

    dmat = local_diffusion_matrices(geometry, D)
    local = eafe_matrices(geometry.coords, dmat, q)
    if stationary.gamma > 0:
        local = local + stationary.gamma * mass_matrices(geometry, 1, lump=lump_mass)
    rhs = load_vectors(geometry, 1, stationary.source)

    dofmap = build_dofmap(mesh, 1)
    extra = []
    if BoundaryRole.OUTFLOW_FINAL not in stationary.dirichlet_roles:
        extra.append(outflow_matrix(mesh, dofmap, stationary.convection_at, lump=lump_mass))
    logger.debug(f"[EAFE] max |q| h = {np.max(np.linalg.norm(q, axis=1) * geometry.diameters):.3e}")
    return finish_system(mesh, dofmap, stationary, local, rhs, extra, scheme="eafe")


@dataclass
class MMatrixReport:
    is_m_matrix: bool
    checked_rows: int
    violating_entries: List[Tuple[int, int, float, str]] = field(default_factory=list)

    def to_dict(self):
        return {
            "is_m_matrix": self.is_m_matrix,
            "checked_rows": self.checked_rows,
            "violations": len(self.violating_entries),
        }


def m_matrix_check(
    matrix,
    exclude_rows: Optional[np.ndarray] = None,
    max_reported: int = 50,
) -> MMatrixReport:
    """
    Sign and weak diagonal dominance scan over the rows not in ``exclude_rows``
    (eliminated Dirichlet rows): off-diagonals <= 1e-14 ||row||, diagonal > 0,
    a_ii >= sum_{j != i} |a_ij| up to rounding.
    """
    A = sp.csr_matrix(matrix)
    rows = np.ones(A.shape[0], dtype=bool)
    if exclude_rows is not None and len(exclude_rows):
        rows[np.asarray(exclude_rows)] = False
    violations: List[Tuple[int, int, float, str]] = []
    checked = 0
    for i in np.flatnonzero(rows):
        start, stop = A.indptr[i], A.indptr[i + 1]
        cols = A.indices[start:stop]
        vals = A.data[start:stop]
        checked += 1
        row_norm = float(np.abs(vals).max()) if len(vals) else 0.0
        on_diag = cols == i
        diag = float(vals[on_diag].sum()) if np.any(on_diag) else 0.0
        offd = vals[~on_diag]
        if diag <= 0:
            violations.append((int(i), int(i), diag, "non-positive diagonal"))
        for j, v in zip(cols[~on_diag], offd):
            if v > 1e-14 * row_norm:
                violations.append((int(i), int(j), float(v), "positive off-diagonal"))
        if diag - np.abs(offd).sum() < -1e-12 * np.abs(vals).sum():
            violations.append((int(i), int(i), float(diag - np.abs(offd).sum()), "not diagonally dominant"))
    report = MMatrixReport(is_m_matrix=not violations, checked_rows=checked,
                           violating_entries=violations[:max_reported])
    if violations:
        logger.warning(f"[EAFE] M-matrix check failed: {len(violations)} violations in {checked} rows")
    else:
        logger.info(f"[EAFE] M-matrix check passed on {checked} rows")
    return report
