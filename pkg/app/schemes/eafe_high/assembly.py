"""
Global assembly of the general-order exponentially fitted scheme.

    a_h(u_h, v_h) = sum_T int_T J_T(u_h) . grad v_h

For trial function xi_m the recovered flux is J_T(xi_m) = sum_k C_km psi_k,
so the local matrix is A_T = G^T C with G_kj = int_T psi_k . grad xi_j.
Mass, load, outflow and Dirichlet handling are those of the lowest-order
scheme.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np

from app.core.exceptions import ExportError, InvalidInputError
from app.fem.geometry import ElementGeometry, batch_geometry, compute_element_geometry
from app.fem.lagrange import build_dofmap, local_dof_count, physical_gradients, shape_derivatives
from app.fem.quadrature import simplex_quadrature
from app.mesh.models import BoundaryRole, SimplicialMesh
from app.problems.models import AnyProblem, as_stationary
from app.schemes.common import (
    AssembledSystem,
    finish_system,
    load_vectors,
    mass_matrices,
    outflow_matrix,
    require_classified,
)
from app.schemes.eafe_high.flux_recovery import (
    FluxRecovery,
    adjoint_weights,
    build_Z,
    compute_d,
    recover_flux,
)
from app.schemes.eafe_high.nedelec import NedelecSpace, build_P, build_nedelec_space, check_supported
from app.schemes.eafe_low import frozen_coefficients

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HighOrderElement:
    space: NedelecSpace
    P: np.ndarray
    Z: np.ndarray
    recovery: FluxRecovery
    matrix: np.ndarray  # rows indexed by test functions


def flux_gradient_pairing(space: NedelecSpace) -> np.ndarray:
    """G_kj = int_T psi_k . grad xi_j, shape (M0, k)."""
    n, r = space.dim, space.order
    rule = simplex_quadrature(n, 2 * r)
    points = rule.points @ space.vertices
    psi = space.psi_values(points)
    grads = physical_gradients(shape_derivatives(n, r, rule.points), space.lambda_grads[None])[0]
    return space.volume * np.einsum("q,kqd,qjd->kj", rule.weights, psi, grads)


def high_order_element(
    geom: ElementGeometry,
    D: np.ndarray,
    b: np.ndarray,
    r: int,
    center: Optional[np.ndarray] = None,
    element: Optional[int] = None,
) -> HighOrderElement:
    """Space, P, Z, flux recovery for every trial function and the local matrix."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    q = np.linalg.solve(D, np.asarray(b, dtype=float).ravel())
    space = build_nedelec_space(geom, r, center=center, element=element)
    P = build_P(space)
    Z = build_Z(space, q, D)
    k = local_dof_count(space.dim, r)
    recovery = recover_flux(space, P, Z, compute_d(np.eye(k), space, q),
                            adjoint=adjoint_weights(space, q, D), element=element)
    matrix = flux_gradient_pairing(space).T @ recovery.c
    return HighOrderElement(space=space, P=P, Z=Z, recovery=recovery, matrix=matrix)


def local_high_order_matrix(geom: ElementGeometry, D, b, r: int, center: Optional[np.ndarray] = None) -> np.ndarray:
    return high_order_element(geom, D, b, r, center=center).matrix


def assemble_high_order(
    mesh: SimplicialMesh,
    problem: AnyProblem,
    r: int = 1,
    lump_mass: bool = False,
    dump_elements: Iterable[int] = (),
    dump_dir: Optional[Union[str, Path]] = None,
) -> AssembledSystem:
    """
    Global system of order ``r`` with D and b frozen at element barycenters.

    Raises:
        UnsupportedOrderError: (r, mesh.dim) not available.
        UnisolvenceError: P*ZP failed on some element (its id is attached).
        CoefficientOutOfRangeError: exponential weights out of range after centering.
    """
    require_classified(mesh)
    check_supported(r, mesh.dim)
    stationary = as_stationary(problem)
    geometry = batch_geometry(mesh)
    D, b, _ = frozen_coefficients(stationary, geometry)
    dump = set(int(e) for e in dump_elements)
    if dump and dump_dir is None:
        raise InvalidInputError("dump_dir is required when element dumps are requested")

    k = local_dof_count(mesh.dim, r)
    local = np.empty((mesh.n_simplices, k, k))
    worst = 1.0
    for e in range(mesh.n_simplices):
        result = high_order_element(compute_element_geometry(mesh, e), D[e], b[e], r, element=e)
        local[e] = result.matrix
        worst = max(worst, result.recovery.condition)
        if e in dump:
            dump_element_matrices(Path(dump_dir) / f"element_{e}.txt", e, result.P, result.Z, result.matrix)

    if stationary.gamma > 0:
        local = local + stationary.gamma * mass_matrices(geometry, r, lump=lump_mass)
    rhs = load_vectors(geometry, r, stationary.source)
    dofmap = build_dofmap(mesh, r)
    extra = []
    if BoundaryRole.OUTFLOW_FINAL not in stationary.dirichlet_roles:
        extra.append(outflow_matrix(mesh, dofmap, stationary.convection_at, lump=lump_mass))
    logger.info(f"[EAFE-HO] order {r}: {mesh.n_simplices} elements, worst P*ZP condition {worst:.3e}")
    return finish_system(mesh, dofmap, stationary, local, rhs, extra, scheme="eafe_high")


def dump_element_matrices(path: Union[str, Path], element_id: int, P: np.ndarray, Z: np.ndarray, A_T: np.ndarray) -> Path:
    """
    Plain-text dump: a ``# element <id>`` line, then for each of P, Z, A_T a
    ``# <name> <rows> <cols>`` header followed by the rows, 17 significant digits.
    """
    path = Path(path)
    lines = [f"# element {element_id}"]
    for name, matrix in (("P", P), ("Z", Z), ("A_T", A_T)):
        matrix = np.atleast_2d(matrix)
        lines.append(f"# {name} {matrix.shape[0]} {matrix.shape[1]}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in matrix)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise ExportError(path, str(e)) from e
    logger.debug(f"[EAFE-HO] element {element_id} matrices written to {path}")
    return path


def load_element_matrices(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Read a file written by dump_element_matrices; the element id is under ``element``."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ExportError(path, str(e)) from e
    out: Dict[str, np.ndarray] = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts[:2] == ["#", "element"]:
            out["element"] = np.array(int(parts[2]))
            i += 1
        elif len(parts) == 4 and parts[0] == "#":
            name, rows, cols = parts[1], int(parts[2]), int(parts[3])
            block = [[float(v) for v in line.split()] for line in lines[i + 1:i + 1 + rows]]
            out[name] = np.array(block).reshape(rows, cols)
            i += 1 + rows
        else:
            raise ExportError(path, f"unexpected line {i + 1}: {lines[i]!r}")
    return out
