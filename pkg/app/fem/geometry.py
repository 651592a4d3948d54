"""
Element geometry and barycentric calculus.

For a simplex with vertices y_0..y_n the affine map is y = y_0 + B x with
B = (y_1 - y_0 | ... | y_n - y_0). The barycentric coordinates are
lambda_m = (B^-1 (y - y_0))_m for m >= 1 and lambda_0 = 1 - sum, so the
gradients of lambda_1..lambda_n are the rows of B^-1.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import List, Tuple

import numpy as np

from app.core.exceptions import DegenerateElementError, InvalidInputError
from app.mesh.models import SimplicialMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgeInfo:
    i: int
    j: int
    tangent: np.ndarray  # unit vector from vertex i to vertex j
    length: float


@dataclass(frozen=True)
class ElementGeometry:
    """Geometry of a single simplex."""
    vertex_coords: np.ndarray   # (n+1, n)
    B: np.ndarray               # (n, n), columns y_m - y_0
    det: float
    volume: float
    lambda_grads: np.ndarray    # (n+1, n)
    edges: Tuple[EdgeInfo, ...]

    @property
    def dim(self) -> int:
        return int(self.B.shape[0])

    @property
    def barycenter(self) -> np.ndarray:
        return self.vertex_coords.mean(axis=0)

    @property
    def diameter(self) -> float:
        return max(e.length for e in self.edges)

    def barycentric(self, points: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of physical points, shape (Q, n+1)."""
        x = np.linalg.solve(self.B, (np.atleast_2d(points) - self.vertex_coords[0]).T).T
        return np.hstack([1.0 - x.sum(axis=1, keepdims=True), x])

    def to_physical(self, lam: np.ndarray) -> np.ndarray:
        return np.atleast_2d(lam) @ self.vertex_coords


@dataclass(frozen=True)
class GeometryBatch:
    """Geometry of all elements of a mesh, stacked along the first axis."""
    coords: np.ndarray       # (E, n+1, n)
    B: np.ndarray            # (E, n, n)
    det: np.ndarray          # (E,)
    volumes: np.ndarray      # (E,)
    grads: np.ndarray        # (E, n+1, n)
    barycenters: np.ndarray  # (E, n)
    diameters: np.ndarray    # (E,)

    @property
    def n_elements(self) -> int:
        return int(self.coords.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coords.shape[2])


def _edge_matrix(coords: np.ndarray) -> np.ndarray:
    return np.swapaxes(coords[..., 1:, :] - coords[..., :1, :], -1, -2)


def _diameters(coords: np.ndarray) -> np.ndarray:
    n_loc = coords.shape[-2]
    longest = np.zeros(coords.shape[:-2])
    for i, j in combinations(range(n_loc), 2):
        longest = np.maximum(longest, np.linalg.norm(coords[..., j, :] - coords[..., i, :], axis=-1))
    return longest


def geometry_from_coords(coords: np.ndarray, first_index: int = 0) -> GeometryBatch:
    """
    Batched geometry for element coordinates of shape (E, n+1, n).

    Raises:
        DegenerateElementError: |det B| below 1e-14 h^n for some element.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 3 or coords.shape[1] != coords.shape[2] + 1:
        raise InvalidInputError(f"expected element coordinates of shape (E, n+1, n), got {coords.shape}")
    n = coords.shape[2]
    B = _edge_matrix(coords)
    det = np.linalg.det(B)
    diam = _diameters(coords)
    threshold = 1e-14 * diam ** n
    bad = np.abs(det) < threshold
    if np.any(bad):
        e = int(np.flatnonzero(bad)[0])
        raise DegenerateElementError(first_index + e, float(abs(det[e])), float(threshold[e]))
    Binv = np.linalg.inv(B)
    grads = np.concatenate([-Binv.sum(axis=1, keepdims=True), Binv], axis=1)
    return GeometryBatch(
        coords=coords,
        B=B,
        det=det,
        volumes=np.abs(det) / factorial(n),
        grads=grads,
        barycenters=coords.mean(axis=1),
        diameters=diam,
    )


def batch_geometry(mesh: SimplicialMesh) -> GeometryBatch:
    return geometry_from_coords(mesh.element_coordinates)


def element_geometry_from_vertices(vertex_coords: np.ndarray) -> ElementGeometry:
    """Geometry of one simplex given its (n+1, n) vertex coordinates."""
    batch = geometry_from_coords(np.asarray(vertex_coords, dtype=float)[None])
    coords = batch.coords[0]
    edges: List[EdgeInfo] = []
    for i, j in combinations(range(coords.shape[0]), 2):
        v = coords[j] - coords[i]
        length = float(np.linalg.norm(v))
        edges.append(EdgeInfo(i=i, j=j, tangent=v / length, length=length))
    return ElementGeometry(
        vertex_coords=coords,
        B=batch.B[0],
        det=float(batch.det[0]),
        volume=float(batch.volumes[0]),
        lambda_grads=batch.grads[0],
        edges=tuple(edges),
    )


def compute_element_geometry(mesh: SimplicialMesh, element_index: int) -> ElementGeometry:
    if not 0 <= element_index < mesh.n_simplices:
        raise InvalidInputError(f"element index {element_index} out of range [0, {mesh.n_simplices})")
    try:
        return element_geometry_from_vertices(mesh.element_coordinates[element_index])
    except DegenerateElementError as e:
        raise DegenerateElementError(element_index, e.det, e.threshold) from None


def local_diffusion_matrices(geometry: GeometryBatch, D) -> np.ndarray:
    """
    d^T_ji = |T| D grad(lambda_i) . grad(lambda_j) for every element.

    ``D`` is one (n, n) matrix or a stack (E, n, n) of per-element values.
    """
    D = np.asarray(D, dtype=float)
    G = geometry.grads
    if D.ndim == 2:
        dmat = np.einsum("eik,kl,ejl->eji", G, D, G)
    else:
        dmat = np.einsum("eik,ekl,ejl->eji", G, D, G)
    return dmat * geometry.volumes[:, None, None]


def local_diffusion_matrix(geom: ElementGeometry, D) -> np.ndarray:
    """Local stiffness d^T of one element; symmetric for symmetric D."""
    D = np.asarray(D, dtype=float)
    G = geom.lambda_grads
    return geom.volume * (G @ D @ G.T)
