"""
Error norms and integrals of Lagrange fields.
"""

import logging
from dataclasses import dataclass
from math import factorial
from typing import Callable, Iterable, Optional

import numpy as np

from app.fem.geometry import GeometryBatch, batch_geometry
from app.fem.lagrange import DofMap, build_dofmap, evaluate_at_quadrature, shape_functions
from app.fem.quadrature import simplex_quadrature
from app.mesh.models import BoundaryRole, SimplicialMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    h1_semi: float

    def to_dict(self):
        return {"l2": self.l2, "h1_semi": self.h1_semi}


def _degree(r: int, degree: Optional[int]) -> int:
    return max(4, 2 * r + 2) if degree is None else int(degree)


def error_norms(
    u_h: np.ndarray,
    exact: Callable[[np.ndarray], np.ndarray],
    exact_gradient: Optional[Callable[[np.ndarray], np.ndarray]],
    mesh: SimplicialMesh,
    r: int,
    degree: Optional[int] = None,
    geometry: Optional[GeometryBatch] = None,
) -> ErrorNorms:
    """
    ||u - u_h||_L2 and |u - u_h|_H1 by element quadrature of degree >= 2r+2.
    ``exact_gradient`` may be None, in which case the H1 part is reported as 0.
    """
    geometry = geometry or batch_geometry(mesh)
    dofmap = build_dofmap(mesh, r)
    rule = simplex_quadrature(mesh.dim, _degree(r, degree))
    values, gradients = evaluate_at_quadrature(u_h, dofmap, geometry.grads, rule.points)
    points = rule.physical_points(geometry.coords)  # (E, Q, n)
    flat = points.reshape(-1, mesh.dim)
    scale = geometry.volumes[:, None] * rule.weights[None, :]

    diff = values - np.asarray(exact(flat), dtype=float).reshape(values.shape)
    l2 = float(np.sqrt(np.sum(scale * diff ** 2)))
    h1 = 0.0
    if exact_gradient is not None:
        gdiff = gradients - np.asarray(exact_gradient(flat), dtype=float).reshape(gradients.shape)
        h1 = float(np.sqrt(np.sum(scale * np.sum(gdiff ** 2, axis=-1))))
    return ErrorNorms(l2=l2, h1_semi=h1)


def l2_norm(u: np.ndarray, mesh: SimplicialMesh, r: int) -> float:
    return error_norms(u, lambda y: np.zeros(len(y)), None, mesh, r).l2


def h1_seminorm(u: np.ndarray, mesh: SimplicialMesh, r: int, components: Optional[Iterable[int]] = None) -> float:
    """
    |u|_H1 of a Lagrange field; ``components`` restricts the gradient to
    selected coordinates (e.g. the spatial ones).
    """
    geometry = batch_geometry(mesh)
    dofmap = build_dofmap(mesh, r)
    rule = simplex_quadrature(mesh.dim, max(2 * r, 2))
    _, gradients = evaluate_at_quadrature(u, dofmap, geometry.grads, rule.points)
    if components is not None:
        gradients = gradients[..., list(components)]
    scale = geometry.volumes[:, None] * rule.weights[None, :]
    return float(np.sqrt(np.sum(scale * np.sum(gradients ** 2, axis=-1))))


def facet_measures(coords: np.ndarray) -> np.ndarray:
    """(n-1)-dimensional measure of facets with vertex coordinates (F, n, n)."""
    k = coords.shape[1] - 1
    if k == 0:
        return np.ones(coords.shape[0])
    G = np.swapaxes(coords[:, 1:] - coords[:, :1], 1, 2)  # (F, n, k)
    gram = np.einsum("fdi,fdj->fij", G, G)
    return np.sqrt(np.abs(np.linalg.det(gram))) / factorial(k)


def facet_quadrature(mesh: SimplicialMesh, facets: np.ndarray, degree: int):
    """
    Quadrature on boundary facets expressed in the owning elements.

    Returns:
        owners (F,), element barycentric points (F, Q, n+1), weights (F, Q)
        scaled by the facet measure, and physical points (F, Q, n).
    """
    n = mesh.dim
    owners = mesh.boundary_owners[facets]
    opposite = mesh.boundary_local[facets]
    rule = simplex_quadrature(n - 1, degree)
    F, Q = len(facets), rule.n_points
    lam = np.zeros((F, Q, n + 1))
    for f in range(F):
        others = [k for k in range(n + 1) if k != opposite[f]]
        lam[f][:, others] = rule.points
    coords = mesh.element_coordinates[owners]  # (F, n+1, n)
    facet_coords = np.stack(
        [np.delete(coords[f], opposite[f], axis=0) for f in range(F)]
    ) if F else np.zeros((0, n, n))
    weights = facet_measures(facet_coords)[:, None] * rule.weights[None, :]
    points = np.einsum("fqi,fid->fqd", lam, coords)
    return owners, lam, weights, points


def facet_l2_norm_sq(u: np.ndarray, mesh: SimplicialMesh, r: int, role: BoundaryRole) -> float:
    """Squared L2 norm of the trace of a Lagrange field on facets with ``role``."""
    facets = mesh.facets_with_role(role)
    if len(facets) == 0:
        return 0.0
    dofmap: DofMap = build_dofmap(mesh, r)
    owners, lam, weights, _ = facet_quadrature(mesh, facets, 2 * r + 2)
    coeffs = np.asarray(u)[dofmap.element_dofs[owners]]  # (F, k)
    values = np.stack([shape_functions(mesh.dim, r, lam[f]) @ coeffs[f] for f in range(len(facets))])
    return float(np.sum(weights * values ** 2))
