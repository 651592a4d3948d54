"""
Assembly plumbing shared by the schemes: mass, load and outflow terms,
Dirichlet elimination and the assembled-system container.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp

from app.core.exceptions import InvalidInputError, MeshConsistencyError
from app.fem.geometry import GeometryBatch
from app.fem.lagrange import DofMap, boundary_dofs, shape_functions
from app.fem.norms import facet_quadrature
from app.fem.quadrature import simplex_quadrature
from app.linalg.sparse import finalize, scatter_local, scatter_vector
from app.mesh.models import BoundaryRole, SimplicialMesh
from app.problems.models import StationaryProblem

logger = logging.getLogger(__name__)


@dataclass
class AssembledSystem:
    """
    Global system after Dirichlet elimination.

    ``matrix``/``rhs`` are the reduced system (Dirichlet rows replaced by the
    identity, their columns moved to the right-hand side); ``raw_matrix`` and
    ``raw_rhs`` are the sums of element contributions before elimination.
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    raw_matrix: sp.csr_matrix
    raw_rhs: np.ndarray
    dofmap: DofMap
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    scheme: str = ""

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


def require_classified(mesh: SimplicialMesh) -> None:
    if not mesh.is_classified:
        raise MeshConsistencyError("mesh boundary has not been classified")


def mass_matrices(geometry: GeometryBatch, r: int, lump: bool = False) -> np.ndarray:
    """Local mass matrices (E, k, k); row-sum lumping for P1 on request."""
    n = geometry.dim
    rule = simplex_quadrature(n, 2 * r)
    N = shape_functions(n, r, rule.points)  # (Q, k)
    ref = np.einsum("q,qj,qi->ji", rule.weights, N, N)
    if lump:
        if r != 1:
            raise InvalidInputError("mass lumping is only available for P1")
        ref = np.diag(ref.sum(axis=1))
    return geometry.volumes[:, None, None] * ref[None]


def load_vectors(geometry: GeometryBatch, r: int, source: Callable, degree: Optional[int] = None) -> np.ndarray:
    """Local load vectors int_T f phi_j, shape (E, k)."""
    n = geometry.dim
    rule = simplex_quadrature(n, degree if degree is not None else max(4, 2 * r + 2))
    N = shape_functions(n, r, rule.points)
    points = rule.physical_points(geometry.coords)
    f = np.asarray(source(points.reshape(-1, n)), dtype=float).reshape(points.shape[:2])
    return geometry.volumes[:, None] * ((f * rule.weights[None, :]) @ N)


def outflow_matrix(
    mesh: SimplicialMesh,
    dofmap: DofMap,
    convection: Callable[[np.ndarray], np.ndarray],
    lump: bool = False,
) -> sp.csr_matrix:
    """
    int (b . n) u v over OUTFLOW_FINAL facets; the outward normal there is +e_n.
    """
    facets = mesh.facets_with_role(BoundaryRole.OUTFLOW_FINAL)
    n, r = mesh.dim, dofmap.order
    if len(facets) == 0:
        return sp.csr_matrix((dofmap.n_dofs, dofmap.n_dofs))
    owners, lam, weights, points = facet_quadrature(mesh, facets, 2 * r + 1)
    bn = np.asarray(convection(points.reshape(-1, n)), dtype=float)[:, -1].reshape(weights.shape)
    F = len(facets)
    local = np.empty((F, dofmap.element_dofs.shape[1], dofmap.element_dofs.shape[1]))
    for f in range(F):
        N = shape_functions(n, r, lam[f])
        local[f] = np.einsum("q,qj,qi->ji", weights[f] * bn[f], N, N)
    if lump:
        if r != 1:
            raise InvalidInputError("mass lumping is only available for P1")
        local = local.sum(axis=2)[:, :, None] * np.eye(local.shape[2])[None]
    return scatter_local(local, dofmap.element_dofs[owners], dofmap.n_dofs)


def dirichlet_data(mesh: SimplicialMesh, dofmap: DofMap, problem: StationaryProblem):
    dofs = boundary_dofs(mesh, dofmap, problem.dirichlet_roles)
    if len(dofs) == 0:
        return dofs, np.zeros(0)
    values = np.asarray(problem.dirichlet(dofmap.node_coords[dofs]), dtype=float).reshape(len(dofs))
    return dofs, values


def apply_dirichlet(A: sp.csr_matrix, rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """
    Row replacement: Dirichlet rows become identity rows with the boundary
    value on the right; their columns in free rows move to the right-hand side.
    """
    n = A.shape[0]
    g = np.zeros(n)
    g[dofs] = values
    free = np.ones(n)
    free[dofs] = 0.0
    P_free = sp.diags(free)
    reduced = P_free @ A @ P_free + sp.diags(1.0 - free)
    new_rhs = free * (rhs - A @ g) + g
    return finalize(reduced), new_rhs


def finish_system(
    mesh: SimplicialMesh,
    dofmap: DofMap,
    problem: StationaryProblem,
    local_matrices: np.ndarray,
    local_rhs: np.ndarray,
    extra: Iterable[sp.spmatrix] = (),
    scheme: str = "",
) -> AssembledSystem:
    """Scatter element contributions, add global extras and eliminate Dirichlet DOFs."""
    A = scatter_local(local_matrices, dofmap.element_dofs, dofmap.n_dofs)
    for term in extra:
        A = A + term
    A = finalize(A)
    b = scatter_vector(local_rhs, dofmap.element_dofs, dofmap.n_dofs)
    dofs, values = dirichlet_data(mesh, dofmap, problem)
    reduced, reduced_rhs = apply_dirichlet(A, b, dofs, values)
    logger.info(f"[{scheme.upper() or 'ASSEMBLY'}] {problem.name}: {dofmap.n_dofs} dofs, "
                f"{len(dofs)} Dirichlet, nnz={reduced.nnz}")
    return AssembledSystem(
        matrix=reduced,
        rhs=reduced_rhs,
        raw_matrix=A,
        raw_rhs=b,
        dofmap=dofmap,
        dirichlet_dofs=dofs,
        dirichlet_values=values,
        scheme=scheme,
    )
