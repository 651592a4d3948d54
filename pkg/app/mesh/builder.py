"""
Generation, refinement and boundary classification of simplicial box meshes.

Box meshes use the Kuhn splitting: every grid cell is cut into n! simplices
sharing the main diagonal from its lower to its upper corner. Each Kuhn
simplex is a path along the coordinate axes, so its vertices are ordered by
increasing coordinate sum; uniform refinement relies on that ordering.
"""

import logging
from itertools import permutations
from math import factorial
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import InvalidInputError, MeshConsistencyError
from app.mesh.models import BoundaryRole, SimplicialMesh

logger = logging.getLogger(__name__)

Extents = Tuple[Tuple[float, float], ...]

# Red refinement tables in terms of the local vertices 0..n and the edge
# midpoints "ij". Applied to parents sorted by coordinate sum, the interior
# diagonal joins the midpoints of edges (0,2) and (1,3).
_RED_2D = (
    ("0", "01", "02"),
    ("01", "1", "12"),
    ("02", "12", "2"),
    ("01", "02", "12"),
)
_RED_3D = (
    ("0", "01", "02", "03"),
    ("01", "1", "12", "13"),
    ("02", "12", "2", "23"),
    ("03", "13", "23", "3"),
    ("01", "02", "03", "13"),
    ("01", "02", "12", "13"),
    ("02", "03", "13", "23"),
    ("02", "12", "13", "23"),
)
_RED_1D = (("0", "01"), ("01", "1"))


def _normalize_extents(dim: int, extents: Optional[Sequence[Sequence[float]]]) -> Extents:
    if extents is None:
        return tuple((0.0, 1.0) for _ in range(dim))
    bounds = tuple((float(lo), float(hi)) for lo, hi in extents)
    if len(bounds) != dim:
        raise InvalidInputError(f"expected {dim} extents, got {len(bounds)}")
    for axis, (lo, hi) in enumerate(bounds):
        if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
            raise InvalidInputError(f"degenerate extent on axis {axis}: ({lo}, {hi})")
    return bounds


def _normalize_divisions(dim: int, divisions) -> Tuple[int, ...]:
    if np.isscalar(divisions):
        divisions = (int(divisions),) * dim
    divs = tuple(int(d) for d in divisions)
    if len(divs) != dim:
        raise InvalidInputError(f"expected {dim} division counts, got {len(divs)}")
    if any(d < 1 for d in divs):
        raise InvalidInputError(f"divisions must be positive, got {divs}")
    return divs


def signed_volumes(vertices: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Signed simplex volumes det(B)/n!."""
    coords = vertices[simplices]
    n = coords.shape[2]
    B = np.transpose(coords[:, 1:] - coords[:, :1], (0, 2, 1))
    return np.linalg.det(B) / factorial(n)


def _orient(vertices: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Swap the last two vertices of negatively oriented simplices."""
    simplices = simplices.copy()
    if simplices.shape[1] < 3:
        flip = vertices[simplices[:, 1], 0] < vertices[simplices[:, 0], 0]
        simplices[flip] = simplices[flip][:, ::-1]
        return simplices
    vol = signed_volumes(vertices, simplices)
    flip = vol < 0
    simplices[flip, -2:] = simplices[flip][:, [-1, -2]]
    return simplices


def extract_boundary_facets(simplices: np.ndarray):
    """
    Facet incidence analysis.

    Returns:
        (facets, owners, local) for the boundary facets (incidence 1): sorted
        vertex tuples, owning element, local index of the opposite vertex.

    Raises:
        MeshConsistencyError: a facet shared by more than two simplices.
    """
    n_loc = simplices.shape[1]
    all_facets = []
    for opposite in range(n_loc):
        keep = [k for k in range(n_loc) if k != opposite]
        all_facets.append(np.sort(simplices[:, keep], axis=1))
    stacked = np.stack(all_facets, axis=1).reshape(-1, n_loc - 1)
    unique, first, inverse, counts = np.unique(
        stacked, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    if np.any(counts > 2):
        bad = unique[counts > 2][0]
        raise MeshConsistencyError(f"facet {tuple(int(v) for v in bad)} is shared by more than two simplices")
    boundary = counts == 1
    occurrence = first[boundary]
    return unique[boundary], occurrence // n_loc, occurrence % n_loc


def facet_incidence_counts(mesh: SimplicialMesh) -> np.ndarray:
    """Number of simplices sharing each facet (1 on the boundary, 2 inside)."""
    n_loc = mesh.dim + 1
    stacked = np.concatenate(
        [np.sort(np.delete(mesh.simplices, k, axis=1), axis=1) for k in range(n_loc)]
    )
    _, counts = np.unique(stacked, axis=0, return_counts=True)
    return counts


def _assemble(dim, vertices, simplices, extents, metadata) -> SimplicialMesh:
    simplices = _orient(vertices, simplices.astype(np.int64))
    facets, owners, local = extract_boundary_facets(simplices)
    return SimplicialMesh(
        dim=dim,
        vertices=vertices,
        simplices=simplices,
        extents=extents,
        boundary_facets=facets,
        boundary_owners=owners,
        boundary_local=local,
        metadata=metadata,
    )


def build_box_mesh(space_dim: int, divisions, extents=None, classify: bool = True) -> SimplicialMesh:
    """
    Kuhn-split tensor mesh of the space-time box.

    Args:
        space_dim: 1 or 2 (mesh dimension n = space_dim + 1).
        divisions: cells per axis (int or one per axis, time last).
        extents: ((lo, hi), ...) per axis, time last; unit box by default.
        classify: assign boundary roles right away.
    """
    if space_dim not in (1, 2):
        raise InvalidInputError(f"space_dim must be 1 or 2, got {space_dim}")
    n = space_dim + 1
    divs = _normalize_divisions(n, divisions)
    bounds = _normalize_extents(n, extents)

    axes = [np.linspace(lo, hi, d + 1) for (lo, hi), d in zip(bounds, divs)]
    grid = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grid], axis=1)

    shape = tuple(d + 1 for d in divs)
    corners = np.stack(
        np.meshgrid(*[np.arange(d) for d in divs], indexing="ij"), axis=-1
    ).reshape(-1, n)

    blocks = []
    for perm in permutations(range(n)):
        path = [corners.copy()]
        current = corners.copy()
        for axis in perm:
            current = current.copy()
            current[:, axis] += 1
            path.append(current)
        blocks.append(np.stack([np.ravel_multi_index(tuple(p.T), shape) for p in path], axis=1))
    # box-major ordering: all permutations of box 0, then box 1, ...
    simplices = np.stack(blocks, axis=1).reshape(-1, n + 1)

    mesh = _assemble(n, vertices, simplices, bounds, {"divisions": divs, "refinements": 0})
    logger.debug(f"[MESH] box mesh n={n} divisions={divs}: {mesh.n_vertices} vertices, {mesh.n_simplices} simplices")
    return classify_boundary(mesh, bounds[-1][1]) if classify else mesh


def build_interval_mesh(divisions: int, extent=(0.0, 1.0)) -> SimplicialMesh:
    """
    Uniform 1D mesh for steady problems; both end points are Dirichlet.
    """
    (divs,) = _normalize_divisions(1, (divisions,))
    ((lo, hi),) = _normalize_extents(1, (extent,))
    vertices = np.linspace(lo, hi, divs + 1).reshape(-1, 1)
    simplices = np.stack([np.arange(divs), np.arange(1, divs + 1)], axis=1)
    mesh = _assemble(1, vertices, simplices, ((lo, hi),), {"divisions": (divs,), "refinements": 0})
    roles = tuple(BoundaryRole.DIRICHLET_LATERAL for _ in range(len(mesh.boundary_facets)))
    return _with_roles(mesh, roles)


def _with_roles(mesh: SimplicialMesh, roles) -> SimplicialMesh:
    return SimplicialMesh(
        dim=mesh.dim,
        vertices=mesh.vertices,
        simplices=mesh.simplices,
        extents=mesh.extents,
        boundary_facets=mesh.boundary_facets,
        boundary_owners=mesh.boundary_owners,
        boundary_local=mesh.boundary_local,
        boundary_roles=tuple(roles),
        metadata=dict(mesh.metadata),
    )


def classify_boundary(mesh: SimplicialMesh, t_max: Optional[float] = None) -> SimplicialMesh:
    """
    Label every boundary facet.

    A facet is DIRICHLET_INITIAL if all its vertices lie at the lower time
    bound, OUTFLOW_FINAL if all lie at t_max, DIRICHLET_LATERAL if all lie on
    one spatial bounding plane. Anything else is a consistency error.
    """
    if mesh.dim < 2:
        return _with_roles(mesh, [BoundaryRole.DIRICHLET_LATERAL] * len(mesh.boundary_facets))
    t_max = mesh.t_max if t_max is None else float(t_max)
    t_min = mesh.extents[-1][0]
    t_tol = 1e-12 * max(abs(t_max), 1e-300)

    coords = mesh.vertices[mesh.boundary_facets]  # (F, n, n)
    times = coords[:, :, -1]
    initial = np.all(np.abs(times - t_min) <= t_tol, axis=1)
    final = np.all(np.abs(times - t_max) <= t_tol, axis=1)

    lateral = np.zeros(len(coords), dtype=bool)
    for axis, (lo, hi) in enumerate(mesh.extents[:-1]):
        tol = 1e-12 * max(abs(lo), abs(hi), hi - lo)
        x = coords[:, :, axis]
        lateral |= np.all(np.abs(x - lo) <= tol, axis=1)
        lateral |= np.all(np.abs(x - hi) <= tol, axis=1)

    unlabelled = ~(initial | final | lateral)
    if np.any(unlabelled):
        k = int(np.flatnonzero(unlabelled)[0])
        raise MeshConsistencyError(
            f"boundary facet {tuple(int(v) for v in mesh.boundary_facets[k])} lies on no face of the box"
        )

    roles = [
        BoundaryRole.DIRICHLET_INITIAL if i else BoundaryRole.OUTFLOW_FINAL if f else BoundaryRole.DIRICHLET_LATERAL
        for i, f in zip(initial, final)
    ]
    return _with_roles(mesh, roles)


def uniform_refine(mesh: SimplicialMesh) -> SimplicialMesh:
    """
    Red refinement: bisect every edge, 2^n children per simplex.
    """
    n = mesh.dim
    table = {1: _RED_1D, 2: _RED_2D, 3: _RED_3D}.get(n)
    if table is None:
        raise InvalidInputError(f"refinement not available in dimension {n}")

    # sort each parent by coordinate sum, ties by vertex index
    sums = mesh.vertices.sum(axis=1)[mesh.simplices]
    order = np.lexsort((mesh.simplices, sums), axis=-1)
    parents = np.take_along_axis(mesh.simplices, order, axis=1)

    local = {}
    for i in range(n + 1):
        local[str(i)] = parents[:, i]
    edge_keys = []
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            edge_keys.append((f"{i}{j}", np.sort(parents[:, [i, j]], axis=1)))
    all_edges = np.concatenate([pairs for _, pairs in edge_keys])
    edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    inverse = inverse.ravel().reshape(len(edge_keys), -1)
    for k, (name, _) in enumerate(edge_keys):
        local[name] = mesh.n_vertices + inverse[k]

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    children = np.stack(
        [np.stack([local[name] for name in child], axis=1) for child in table], axis=1
    ).reshape(-1, n + 1)

    metadata = dict(mesh.metadata)
    metadata["refinements"] = int(metadata.get("refinements", 0)) + 1
    refined = _assemble(n, vertices, children, mesh.extents, metadata)
    logger.debug(f"[MESH] refined to {refined.n_vertices} vertices, {refined.n_simplices} simplices")
    if n == 1:
        return _with_roles(refined, [BoundaryRole.DIRICHLET_LATERAL] * len(refined.boundary_facets))
    return classify_boundary(refined) if mesh.is_classified else refined


def scale_time_axis(mesh: SimplicialMesh, kappa: float) -> SimplicialMesh:
    """Stretch the time coordinate t -> kappa * t (connectivity unchanged)."""
    if kappa <= 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    vertices = np.array(mesh.vertices, dtype=float)
    vertices[:, -1] *= kappa
    extents = mesh.extents[:-1] + ((mesh.extents[-1][0] * kappa, mesh.extents[-1][1] * kappa),)
    stretched = SimplicialMesh(
        dim=mesh.dim,
        vertices=vertices,
        simplices=mesh.simplices,
        extents=extents,
        boundary_facets=mesh.boundary_facets,
        boundary_owners=mesh.boundary_owners,
        boundary_local=mesh.boundary_local,
        metadata=dict(mesh.metadata, kappa=kappa),
    )
    return classify_boundary(stretched) if mesh.is_classified else stretched
