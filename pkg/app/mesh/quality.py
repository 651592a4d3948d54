"""
Mesh quality checks feeding the M-matrix diagnostics: the empty-circumcircle
test in 2D and edge-weight non-obtuseness in 3D.
"""

import logging
from itertools import combinations
from typing import Optional

import numpy as np

from app.core.exceptions import InvalidInputError
from app.mesh.builder import facet_incidence_counts
from app.mesh.models import MeshQualityReport, SimplicialMesh

logger = logging.getLogger(__name__)


def is_conforming(mesh: SimplicialMesh) -> bool:
    """Facet incidence is 1 on the boundary and 2 in the interior, nothing else."""
    counts = facet_incidence_counts(mesh)
    return bool(np.all((counts == 1) | (counts == 2)))


def _incircle(a, b, c, d):
    """Positive when d lies inside the circumcircle of the counter-clockwise triangle abc."""
    rows = []
    for p in (a, b, c):
        dx = p[:, 0] - d[:, 0]
        dy = p[:, 1] - d[:, 1]
        rows.append(np.stack([dx, dy, dx * dx + dy * dy], axis=1))
    return np.linalg.det(np.stack(rows, axis=1))


def delaunay_report(mesh: SimplicialMesh, rtol: float = 1e-12) -> MeshQualityReport:
    """
    Empty-circumcircle test over all interior edges of a 2D mesh.

    Uniform Kuhn meshes have cocircular quadruples, hence the tolerance
    relative to h^4.
    """
    if mesh.dim != 2:
        raise InvalidInputError("Delaunay check is defined for 2D meshes only")
    simp = mesh.simplices
    E = mesh.n_simplices
    facets = np.concatenate([np.sort(np.delete(simp, k, axis=1), axis=1) for k in range(3)])
    opposite = np.concatenate([simp[:, k] for k in range(3)])
    owner = np.tile(np.arange(E), 3)
    _, inverse, counts = np.unique(facets, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()

    order = np.argsort(inverse, kind="stable")
    sorted_ids = inverse[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    interior = starts[counts[sorted_ids[starts]] == 2]
    first, second = order[interior], order[interior + 1]

    V = mesh.vertices
    tri = simp[owner[first]]
    # counter-clockwise thanks to positive orientation
    value = _incircle(V[tri[:, 0]], V[tri[:, 1]], V[tri[:, 2]], V[opposite[second]])
    scale = mesh.mesh_size_h ** 4
    bad = value > rtol * scale
    violations = [(int(owner[f]), int(owner[s])) for f, s in zip(first[bad], second[bad])]
    report = MeshQualityReport(
        passed=not violations,
        checked=int(len(first)),
        violations=violations,
        worst=float(value.max() / scale) if len(value) else None,
    )
    if not report.passed:
        logger.warning(f"[MESH] Delaunay check failed on {len(violations)} interior edges")
    return report


def is_delaunay(mesh: SimplicialMesh, rtol: float = 1e-12) -> bool:
    return delaunay_report(mesh, rtol).passed


def nonobtuse_report(mesh: SimplicialMesh, D: Optional[np.ndarray] = None, rtol: float = 1e-12) -> MeshQualityReport:
    """
    List element edges with a positive local stiffness weight d_ij (i != j).

    All weights non-positive is the sufficient condition for an M-matrix
    stiffness in 3D; ``D`` defaults to the identity.
    """
    from app.fem.geometry import batch_geometry, local_diffusion_matrices

    geometry = batch_geometry(mesh)
    D = np.eye(mesh.dim) if D is None else np.asarray(D, dtype=float)
    dmat = local_diffusion_matrices(geometry, D)
    scale = np.abs(dmat).max(axis=(1, 2))
    violations = []
    worst = -np.inf
    for i, j in combinations(range(mesh.dim + 1), 2):
        w = dmat[:, i, j]
        worst = max(worst, float((w / scale).max()))
        for e in np.flatnonzero(w > rtol * scale):
            violations.append((int(e), i, j))
    violations.sort()
    return MeshQualityReport(passed=not violations, checked=mesh.n_simplices, violations=violations, worst=worst)
