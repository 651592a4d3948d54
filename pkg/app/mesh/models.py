"""
Data models for simplicial space-time meshes.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np


class BoundaryRole(str, Enum):
    """Role of a boundary facet of the space-time box."""
    DIRICHLET_LATERAL = "dirichlet_lateral"   # spatial boundary x (t_min, t_max)
    DIRICHLET_INITIAL = "dirichlet_initial"   # t = t_min
    OUTFLOW_FINAL = "outflow_final"           # t = t_max


ALL_ROLES = frozenset(BoundaryRole)
DIRICHLET_ROLES = frozenset({BoundaryRole.DIRICHLET_LATERAL, BoundaryRole.DIRICHLET_INITIAL})


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """
    Conforming simplicial mesh in dimension ``dim`` (last coordinate is time
    for space-time meshes).

    ``boundary_owners[k]`` is the element containing facet ``k`` and
    ``boundary_local[k]`` the local index of the element vertex opposite to it.
    ``boundary_roles`` is empty until the mesh has been classified.
    """
    dim: int
    vertices: np.ndarray
    simplices: np.ndarray
    extents: Tuple[Tuple[float, float], ...]
    boundary_facets: np.ndarray
    boundary_owners: np.ndarray
    boundary_local: np.ndarray
    boundary_roles: Tuple[BoundaryRole, ...] = ()
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("vertices", "simplices", "boundary_facets", "boundary_owners", "boundary_local"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_simplices(self) -> int:
        return int(self.simplices.shape[0])

    @property
    def is_classified(self) -> bool:
        return len(self.boundary_roles) == len(self.boundary_facets)

    @property
    def t_max(self) -> float:
        return float(self.extents[-1][1])

    @cached_property
    def element_coordinates(self) -> np.ndarray:
        """Vertex coordinates per element, shape (E, dim+1, dim)."""
        return _readonly(self.vertices[self.simplices])

    @cached_property
    def element_diameters(self) -> np.ndarray:
        """Longest edge of each element."""
        coords = self.element_coordinates
        longest = np.zeros(self.n_simplices)
        for i, j in combinations(range(self.dim + 1), 2):
            longest = np.maximum(longest, np.linalg.norm(coords[:, j] - coords[:, i], axis=1))
        return _readonly(longest)

    @cached_property
    def mesh_size_h(self) -> float:
        return float(self.element_diameters.max()) if self.n_simplices else 0.0

    @cached_property
    def edge_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Unique edges (sorted vertex pairs, lexicographic) and, per element,
        the edge id of each local pair (i, j), i < j, in lexicographic order.
        """
        pairs = list(combinations(range(self.dim + 1), 2))
        local = np.stack([np.sort(self.simplices[:, [i, j]], axis=1) for i, j in pairs], axis=1)
        flat = local.reshape(-1, 2)
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        return _readonly(edges), _readonly(inverse.reshape(self.n_simplices, len(pairs)))

    def facets_with_role(self, role: BoundaryRole) -> np.ndarray:
        """Indices of boundary facets carrying ``role``."""
        if not self.is_classified:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(np.array([r == role for r in self.boundary_roles], dtype=bool))

    def role_counts(self) -> Dict[str, int]:
        counts = {role.value: 0 for role in BoundaryRole}
        for role in self.boundary_roles:
            counts[role.value] += 1
        return counts

    def summary(self) -> Dict[str, object]:
        """Mesh statistics for logs and the CLI."""
        return {
            "dim": self.dim,
            "vertices": self.n_vertices,
            "simplices": self.n_simplices,
            "boundary_facets": int(len(self.boundary_facets)),
            "h": self.mesh_size_h,
            "roles": self.role_counts() if self.is_classified else None,
        }


@dataclass
class MeshQualityReport:
    """Outcome of a Delaunay or non-obtuseness check."""
    passed: bool
    checked: int
    violations: List[Tuple[int, ...]] = field(default_factory=list)
    worst: Optional[float] = None
