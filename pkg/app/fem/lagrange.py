"""
Lagrange P1/P2 elements in barycentric form and their global DOF maps.

Local ordering: the n+1 vertex functions first, then (P2 only) one edge
function per local pair (i, j), i < j, in lexicographic order.

    P1: lambda_i
    P2: lambda_i (2 lambda_i - 1)  and  4 lambda_i lambda_j
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, List, Tuple

import numpy as np

from app.core.exceptions import InvalidInputError, UnsupportedOrderError
from app.mesh.models import BoundaryRole, SimplicialMesh

logger = logging.getLogger(__name__)

SUPPORTED_ORDERS = (1, 2)


def _check_order(r: int) -> None:
    if r not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(r)


def local_pairs(n: int) -> List[Tuple[int, int]]:
    return list(combinations(range(n + 1), 2))


def local_dof_count(n: int, r: int) -> int:
    _check_order(r)
    return n + 1 if r == 1 else (n + 1) + len(local_pairs(n))


def reference_nodes(n: int, r: int) -> np.ndarray:
    """Barycentric coordinates of the local Lagrange nodes."""
    _check_order(r)
    nodes = list(np.eye(n + 1))
    if r == 2:
        for i, j in local_pairs(n):
            mid = np.zeros(n + 1)
            mid[[i, j]] = 0.5
            nodes.append(mid)
    return np.array(nodes)


def shape_functions(n: int, r: int, lam: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points, shape (Q, k)."""
    _check_order(r)
    lam = np.atleast_2d(lam)
    if r == 1:
        return lam.copy()
    vertex = lam * (2.0 * lam - 1.0)
    edge = np.stack([4.0 * lam[:, i] * lam[:, j] for i, j in local_pairs(n)], axis=1)
    return np.hstack([vertex, edge])


def shape_derivatives(n: int, r: int, lam: np.ndarray) -> np.ndarray:
    """Derivatives with respect to the barycentric coordinates, shape (Q, k, n+1)."""
    _check_order(r)
    lam = np.atleast_2d(lam)
    Q = lam.shape[0]
    if r == 1:
        return np.broadcast_to(np.eye(n + 1), (Q, n + 1, n + 1)).copy()
    pairs = local_pairs(n)
    dN = np.zeros((Q, n + 1 + len(pairs), n + 1))
    for i in range(n + 1):
        dN[:, i, i] = 4.0 * lam[:, i] - 1.0
    for k, (i, j) in enumerate(pairs):
        dN[:, n + 1 + k, i] = 4.0 * lam[:, j]
        dN[:, n + 1 + k, j] = 4.0 * lam[:, i]
    return dN


def physical_gradients(dN: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """
    Chain rule: (Q, k, n+1) barycentric derivatives and (E, n+1, n) lambda
    gradients -> (E, Q, k, n).
    """
    return np.einsum("qil,eld->eqid", dN, grads)


def shape_hessians(n: int, r: int, grads: np.ndarray) -> np.ndarray:
    """Constant Hessians per element, shape (E, k, n, n); zero for P1."""
    _check_order(r)
    E = grads.shape[0]
    k = local_dof_count(n, r)
    H = np.zeros((E, k, n, n))
    if r == 1:
        return H
    for i in range(n + 1):
        g = grads[:, i]
        H[:, i] = 4.0 * np.einsum("ea,eb->eab", g, g)
    for m, (i, j) in enumerate(local_pairs(n)):
        gi, gj = grads[:, i], grads[:, j]
        H[:, n + 1 + m] = 4.0 * (np.einsum("ea,eb->eab", gi, gj) + np.einsum("ea,eb->eab", gj, gi))
    return H


@dataclass(frozen=True)
class DofMap:
    """Global numbering of Lagrange nodes."""
    order: int
    n_dofs: int
    element_dofs: np.ndarray  # (E, k)
    node_coords: np.ndarray   # (n_dofs, n)
    n_vertices: int


def build_dofmap(mesh: SimplicialMesh, r: int) -> DofMap:
    """Vertices keep their indices; P2 edge nodes follow, numbered by the mesh edge table."""
    _check_order(r)
    if r == 1:
        return DofMap(1, mesh.n_vertices, np.array(mesh.simplices), np.array(mesh.vertices), mesh.n_vertices)
    edges, element_edges = mesh.edge_table
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    element_dofs = np.hstack([mesh.simplices, mesh.n_vertices + element_edges])
    return DofMap(
        order=2,
        n_dofs=mesh.n_vertices + len(edges),
        element_dofs=element_dofs,
        node_coords=np.vstack([mesh.vertices, mid]),
        n_vertices=mesh.n_vertices,
    )


def boundary_dofs(mesh: SimplicialMesh, dofmap: DofMap, roles: Iterable[BoundaryRole]) -> np.ndarray:
    """Sorted DOFs lying on boundary facets with one of ``roles``."""
    roles = set(roles)
    selected = [k for k, role in enumerate(mesh.boundary_roles) if role in roles]
    if not selected:
        return np.zeros(0, dtype=np.int64)
    facets = mesh.boundary_facets[selected]
    dofs = [facets.ravel()]
    if dofmap.order == 2 and facets.shape[1] >= 2:
        edges, _ = mesh.edge_table
        keys = edges[:, 0] * mesh.n_vertices + edges[:, 1]
        for a, b in combinations(range(facets.shape[1]), 2):
            pair = np.sort(facets[:, [a, b]], axis=1)
            ids = np.searchsorted(keys, pair[:, 0] * mesh.n_vertices + pair[:, 1])
            dofs.append(mesh.n_vertices + ids)
    return np.unique(np.concatenate(dofs))


def lagrange_interpolate(f: Callable[[np.ndarray], np.ndarray], mesh: SimplicialMesh, r: int) -> np.ndarray:
    """
    Nodal interpolant coefficients: f evaluated at every Lagrange node.
    ``f`` maps points of shape (N, n) to values of shape (N,).
    """
    dofmap = build_dofmap(mesh, r)
    values = np.asarray(f(dofmap.node_coords), dtype=float)
    if values.shape != (dofmap.n_dofs,):
        raise InvalidInputError(f"interpolated function returned shape {values.shape}, expected ({dofmap.n_dofs},)")
    return values


def evaluate_at_quadrature(u: np.ndarray, dofmap: DofMap, grads: np.ndarray, lam: np.ndarray):
    """
    Values (E, Q) and gradients (E, Q, n) of a Lagrange field at the
    barycentric points ``lam`` of every element.
    """
    n = grads.shape[2]
    N = shape_functions(n, dofmap.order, lam)
    dN = shape_derivatives(n, dofmap.order, lam)
    coeffs = np.asarray(u)[dofmap.element_dofs]  # (E, k)
    values = coeffs @ N.T
    gradients = np.einsum("ek,eqkd->eqd", coeffs, physical_gradients(dN, grads))
    return values, gradients
