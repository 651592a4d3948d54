"""
First-kind Nedelec spaces on a single simplex, in vector-proxy form.

Fields are stored as coefficient arrays over the monomials of the scaled
local coordinate z = (y - y_c) / h (y_c the element barycenter unless
overridden, h the element diameter). Degrees of freedom:

    r = 1:  int_e v . tau_e                              one per edge
    r = 2:  int_e (v . tau_e) lambda_a, int_e (v . tau_e) lambda_b
                                                         two per edge (a, b)
            int_T v_k                                    one per component

tau_e is the unit tangent from the lower to the higher local vertex. The
basis phi_j is the numerical dual of a spanning set of the space, and the
flux basis psi_k of (P_{r-1})^n is e_k times the monomials of degree <= r-1.
"""

import logging
from dataclasses import dataclass, replace
from itertools import combinations, product
from typing import Callable, Optional, Tuple

import numpy as np

from app.core.exceptions import BasisConstructionError, UnsupportedOrderError
from app.fem.geometry import ElementGeometry
from app.fem.lagrange import physical_gradients, reference_nodes, shape_derivatives
from app.fem.quadrature import gauss_legendre_unit, simplex_quadrature

logger = logging.getLogger(__name__)

SUPPORTED = frozenset({(1, 1), (1, 2), (1, 3), (2, 2)})
DUALITY_TOL = 1e-11
RECONSTRUCTION_TOL = 1e-10

VectorField = Callable[[np.ndarray], np.ndarray]
Exponents = Tuple[Tuple[int, ...], ...]


def check_supported(r: int, n: int) -> None:
    if (r, n) not in SUPPORTED:
        raise UnsupportedOrderError(r, n)


def monomial_exponents(n: int, degree: int) -> Exponents:
    """Multi-indices of total degree <= ``degree``, graded, then x_1 first."""
    found = [a for a in product(range(degree + 1), repeat=n) if sum(a) <= degree]
    return tuple(sorted(found, key=lambda a: (sum(a), tuple(-x for x in a))))


def monomial_values(z: np.ndarray, exponents: Exponents) -> np.ndarray:
    z = np.atleast_2d(z)
    return np.stack([np.prod(z ** np.array(a), axis=1) for a in exponents], axis=1)


def default_degree(r: int) -> int:
    return 2 * r + 4


@dataclass(frozen=True)
class DofFunctional:
    """A moment over an edge or over the whole element."""
    kind: str                            # "edge" or "interior"
    vertices: Tuple[int, ...]            # local vertices of the sub-simplex
    weight_vertex: Optional[int] = None  # edge weight lambda_{weight_vertex}, None for 1
    component: Optional[int] = None      # interior moments only

    def label(self) -> str:
        if self.kind == "edge":
            weight = "" if self.weight_vertex is None else f"*lambda{self.weight_vertex}"
            return f"edge{self.vertices}{weight}"
        return f"interior[{self.component}]"


def dof_functionals(n: int, r: int) -> Tuple[DofFunctional, ...]:
    check_supported(r, n)
    edges = list(combinations(range(n + 1), 2))
    if r == 1:
        return tuple(DofFunctional("edge", e) for e in edges)
    out = []
    for a, b in edges:
        out.append(DofFunctional("edge", (a, b), weight_vertex=a))
        out.append(DofFunctional("edge", (a, b), weight_vertex=b))
    out.extend(DofFunctional("interior", tuple(range(n + 1)), component=k) for k in range(n))
    return tuple(out)


@dataclass(frozen=True)
class NedelecSpace:
    """Nedelec space of order r on one element, immutable once built."""
    order: int
    vertices: np.ndarray        # (n+1, n)
    center: np.ndarray          # (n,)
    scale: float
    volume: float
    lambda_grads: np.ndarray    # (n+1, n)
    functionals: Tuple[DofFunctional, ...]
    exponents: Exponents
    basis_coeffs: np.ndarray    # (M, n_mono, n)
    psi_coeffs: np.ndarray      # (M0, n_mono, n)
    grad_basis_map: np.ndarray  # (M, k), entries eta_j(grad xi_m)
    element: Optional[int] = None

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    @property
    def M(self) -> int:
        return len(self.functionals)

    @property
    def M0(self) -> int:
        return int(self.psi_coeffs.shape[0])

    @property
    def lagrange_nodes(self) -> np.ndarray:
        return reference_nodes(self.dim, self.order) @ self.vertices

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.center) / self.scale

    def barycentric(self, points: np.ndarray) -> np.ndarray:
        lam = (np.atleast_2d(points) - self.vertices[0]) @ self.lambda_grads.T
        lam[:, 0] += 1.0
        return lam

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Fields given by ``coeffs`` (K, n_mono, n) at points (Q, n) -> (K, Q, n)."""
        mono = monomial_values(self.local_coords(points), self.exponents)
        return np.einsum("qm,kmd->kqd", mono, coeffs)

    def basis_values(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(self.basis_coeffs, points)

    def psi_values(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(self.psi_coeffs, points)

    def edge_tangent(self, dof: DofFunctional) -> Tuple[np.ndarray, float]:
        a, b = dof.vertices
        t = self.vertices[b] - self.vertices[a]
        length = float(np.linalg.norm(t))
        return t / length, length


def _dof_rule(space: NedelecSpace, dof: DofFunctional, degree: int):
    """Points (S, n), weights including the measure (S,), directions (S, n)."""
    if dof.kind == "edge":
        tau, length = space.edge_tangent(dof)
        s, w = gauss_legendre_unit(degree // 2 + 1)
        start = space.vertices[dof.vertices[0]]
        points = start + s[:, None] * (length * tau)
        direction = np.tile(tau, (len(s), 1))
        if dof.weight_vertex is not None:
            direction *= space.barycentric(points)[:, dof.weight_vertex][:, None]
        return points, w * length, direction
    rule = simplex_quadrature(space.dim, degree)
    points = rule.points @ space.vertices
    direction = np.zeros_like(points)
    direction[:, dof.component] = 1.0
    return points, rule.weights * space.volume, direction


def dof_apply(space: NedelecSpace, j: int, field: VectorField, degree: Optional[int] = None) -> float:
    """
    <eta_j, field> by Gauss quadrature on the sub-simplex of eta_j.

    ``field`` maps points (Q, n) to vectors (Q, n). Exact for polynomial
    fields whose product with the DOF weight has degree <= ``degree``.
    """
    degree = default_degree(space.order) if degree is None else degree
    points, weights, direction = _dof_rule(space, space.functionals[j], degree)
    values = np.asarray(field(points), dtype=float).reshape(points.shape)
    return float(np.einsum("s,sd,sd->", weights, values, direction))


def dof_matrix(space: NedelecSpace, fields: VectorField, degree: Optional[int] = None) -> np.ndarray:
    """All DOFs of a family of fields: ``fields`` maps (Q, n) -> (K, Q, n); result (M, K)."""
    degree = default_degree(space.order) if degree is None else degree
    rows = []
    for dof in space.functionals:
        points, weights, direction = _dof_rule(space, dof, degree)
        values = np.asarray(fields(points), dtype=float)
        rows.append(np.einsum("s,ksd,sd->k", weights, values, direction))
    return np.array(rows)


def _whitney_coeffs(n: int, grads: np.ndarray, lam_c: np.ndarray, scale: float, exponents: Exponents) -> np.ndarray:
    """lambda_a grad lambda_b - lambda_b grad lambda_a with lambda_m = lambda_m(y_c) + h grad lambda_m . z."""
    index = {a: i for i, a in enumerate(exponents)}
    constant = index[(0,) * n]
    linear = [index[tuple(int(i == d) for i in range(n))] for d in range(n)]
    out = []
    for a, b in combinations(range(n + 1), 2):
        C = np.zeros((len(exponents), n))
        C[constant] = lam_c[a] * grads[b] - lam_c[b] * grads[a]
        for d in range(n):
            C[linear[d]] = scale * (grads[a, d] * grads[b] - grads[b, d] * grads[a])
        out.append(C)
    return np.array(out)


def _second_order_spanning(exponents: Exponents) -> np.ndarray:
    """(P_1)^2 plus z1 (-z2, z1) and z2 (-z2, z1)."""
    index = {a: i for i, a in enumerate(exponents)}
    entries = [
        [((0, 0), 0, 1.0)],
        [((0, 0), 1, 1.0)],
        [((1, 0), 0, 1.0)],
        [((1, 0), 1, 1.0)],
        [((0, 1), 0, 1.0)],
        [((0, 1), 1, 1.0)],
        [((1, 1), 0, -1.0), ((2, 0), 1, 1.0)],
        [((0, 2), 0, -1.0), ((1, 1), 1, 1.0)],
    ]
    out = np.zeros((len(entries), len(exponents), 2))
    for m, terms in enumerate(entries):
        for alpha, d, value in terms:
            out[m, index[alpha], d] = value
    return out


def _psi_coeffs(n: int, r: int, exponents: Exponents) -> np.ndarray:
    index = {a: i for i, a in enumerate(exponents)}
    low = monomial_exponents(n, r - 1)
    out = np.zeros((n * len(low), len(exponents), n))
    for k in range(n):
        for m, alpha in enumerate(low):
            out[k * len(low) + m, index[alpha], k] = 1.0
    return out


def build_nedelec_space(
    geom: ElementGeometry,
    r: int,
    center: Optional[np.ndarray] = None,
    element: Optional[int] = None,
) -> NedelecSpace:
    """
    Nedelec space of order ``r`` on ``geom`` with its dual basis.

    Raises:
        UnsupportedOrderError: (r, n) outside r = 1 (n <= 3) and r = 2 (n = 2).
        BasisConstructionError: the DOFs are not unisolvent on the spanning
            set or the computed basis fails the duality check.
    """
    n = geom.dim
    check_supported(r, n)
    center = geom.barycenter if center is None else np.asarray(center, dtype=float).reshape(n)
    exponents = monomial_exponents(n, r)
    draft = NedelecSpace(
        order=r,
        vertices=geom.vertex_coords,
        center=center,
        scale=geom.diameter,
        volume=geom.volume,
        lambda_grads=geom.lambda_grads,
        functionals=dof_functionals(n, r),
        exponents=exponents,
        basis_coeffs=np.zeros((0, len(exponents), n)),
        psi_coeffs=_psi_coeffs(n, r, exponents),
        grad_basis_map=np.zeros((0, 0)),
        element=element,
    )
    if r == 1:
        spanning = _whitney_coeffs(n, geom.lambda_grads, draft.barycentric(center)[0], geom.diameter, exponents)
    else:
        spanning = _second_order_spanning(exponents)

    V = dof_matrix(draft, lambda p: draft.evaluate(spanning, p))
    if np.linalg.cond(V) > 1e12:
        raise BasisConstructionError(f"element {element}: DOFs are not unisolvent on the order-{r} spanning set")
    basis = np.einsum("mj,mpd->jpd", np.linalg.inv(V), spanning)
    space = replace(draft, basis_coeffs=basis)

    duality = dof_matrix(space, space.basis_values)
    error = float(np.abs(duality - np.eye(space.M)).max())
    if error > DUALITY_TOL:
        raise BasisConstructionError(f"element {element}: duality check failed, max |<eta_i, phi_j> - delta_ij| = {error:.2e}")

    k = reference_nodes(n, r).shape[0]

    def lagrange_gradients(points):
        dN = shape_derivatives(n, r, space.barycentric(points))
        return np.transpose(physical_gradients(dN, geom.lambda_grads[None])[0], (1, 0, 2))

    grad_map = dof_matrix(space, lagrange_gradients)
    logger.debug(f"[EAFE-HO] element {element}: order {r} space, M={space.M}, M0={space.M0}, "
                 f"k={k}, duality error {error:.1e}")
    return replace(space, grad_basis_map=grad_map)


def build_P(space: NedelecSpace) -> np.ndarray:
    """
    p_jk = <eta_j, psi_k>, the coordinates of psi_k in the phi basis.

    Raises:
        BasisConstructionError: P is rank deficient or the expansion does not
            reproduce psi_k.
    """
    P = dof_matrix(space, space.psi_values)
    rank = np.linalg.matrix_rank(P)
    if rank < space.M0:
        raise BasisConstructionError(f"element {space.element}: rank(P) = {rank} < M0 = {space.M0}")
    residual = reconstruction_residual(space, P)
    if residual.max() > RECONSTRUCTION_TOL:
        raise BasisConstructionError(
            f"element {space.element}: sum_j p_jk phi_j misses psi_k by {residual.max():.2e} (relative L2)"
        )
    return P


def reconstruction_residual(space: NedelecSpace, P: np.ndarray) -> np.ndarray:
    """Relative L2 norms of sum_j p_jk phi_j - psi_k, one per k."""
    rule = simplex_quadrature(space.dim, 2 * space.order)
    points = rule.points @ space.vertices
    psi = space.psi_values(points)
    expanded = np.einsum("jk,jqd->kqd", P, space.basis_values(points))
    diff = np.einsum("q,kqd,kqd->k", rule.weights, expanded - psi, expanded - psi)
    ref = np.einsum("q,kqd,kqd->k", rule.weights, psi, psi)
    return np.sqrt(diff / ref)
