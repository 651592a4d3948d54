"""
Exponentially weighted DOF matrices and the element flux recovery.

With D and b frozen on the element and q = D^-1 b, the flux J = D grad u - b u
satisfies e^{-q.(y - y_c)} D^-1 J = grad(e^{-q.(y - y_c)} u). The discrete flux
J_T = sum_k c_k psi_k solves the M0 x M0 system

    P* Z P c = P* d,    Z_jk = <eta_j, e^{-q.(y - y_c)} D^-1 phi_k>,
                        d_j  = <eta_j, grad(e^{-q.(y - y_c)} u_I)_I>,

with P* = P^T Lambda, Lambda = Omega W^-1: W holds the exponential mean of
each DOF and Omega is diag(-d_ab) (edge weights of the local stiffness) for
r = 1 and the identity for r = 2. The full M x M matrix Z is never inverted.

All exponentials are centred at y_c, so Z, d and W share the factor
e^{q.y_c} and c does not depend on the centre.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import exprel, factorial

from app.core.exceptions import CoefficientOutOfRangeError, InvalidCoefficientError, UnisolvenceError
from app.fem.quadrature import simplex_quadrature
from app.schemes.eafe_high.nedelec import DofFunctional, NedelecSpace, VectorField

logger = logging.getLogger(__name__)

EXPONENT_LIMIT = 700.0
CONDITION_LIMIT = 1e12
TAYLOR_LIMIT = 4.0
_TAYLOR_TERMS = 40


def edge_exponential_moments(a: float, degree: int) -> np.ndarray:
    """I_k(a) = int_0^1 e^{a s} s^k ds for k = 0..degree."""
    k = np.arange(degree + 1)
    if abs(a) <= TAYLOR_LIMIT:
        m = np.arange(_TAYLOR_TERMS)
        terms = np.power(float(a), m) / factorial(m)
        return (terms[None, :] / (k[:, None] + m[None, :] + 1.0)).sum(axis=1)
    out = np.empty(degree + 1)
    out[0] = exprel(a)
    ea = np.exp(a)
    for j in range(1, degree + 1):
        out[j] = (ea - j * out[j - 1]) / a
    return out


@lru_cache(maxsize=None)
def _fit_nodes(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    m = degree + 1
    s = 0.5 * (1.0 - np.cos(np.pi * (np.arange(m) + 0.5) / m))
    return s, np.polynomial.polynomial.polyvander(s, degree)


def exponent_bound(space: NedelecSpace, q: np.ndarray) -> float:
    return float(np.max(np.abs((space.vertices - space.center) @ np.asarray(q, dtype=float))))


def check_exponent_range(space: NedelecSpace, q: np.ndarray) -> None:
    bound = exponent_bound(space, q)
    if bound > EXPONENT_LIMIT:
        raise CoefficientOutOfRangeError(space.element, bound)


def _edge_weighted_integral(space: NedelecSpace, dof: DofFunctional, integrand, q: np.ndarray, degree: int) -> np.ndarray:
    """
    int_e e^{-q.(y - y_c)} g(y) dl for scalar integrands ``integrand(points) -> (K, S)``
    that are polynomials of degree <= ``degree`` along the edge.

    The edge is parametrised from its endpoint with the larger exponent, so the
    exponent decreases along s and the moments I_k need no cancellation.
    """
    ya, yb = space.vertices[dof.vertices[0]], space.vertices[dof.vertices[1]]
    ea = -float(q @ (ya - space.center))
    eb = -float(q @ (yb - space.center))
    start, end, c0 = (ya, yb, ea) if ea >= eb else (yb, ya, eb)
    slope = -abs(ea - eb)
    s, vander = _fit_nodes(degree)
    g = np.atleast_2d(integrand(start + s[:, None] * (end - start)))
    coeffs = np.linalg.solve(vander, g.T)
    length = float(np.linalg.norm(end - start))
    return length * np.exp(c0) * (edge_exponential_moments(slope, degree) @ coeffs)


def weighted_dof_matrix(space: NedelecSpace, fields: VectorField, q: np.ndarray, degree: Optional[int] = None) -> np.ndarray:
    """
    <eta_j, e^{-q.(y - y_c)} F_k> for fields F_k given as (Q, n) -> (K, Q, n).

    Edge DOFs are integrated in closed form (exact for fields of degree
    <= ``degree`` - (r - 1)); interior DOFs use a degree 2r + 6 simplex rule.
    """
    q = np.asarray(q, dtype=float)
    check_exponent_range(space, q)
    r = space.order
    degree = 2 * r if degree is None else degree
    rule = simplex_quadrature(space.dim, 2 * r + 6)
    interior_points = rule.points @ space.vertices
    interior_weights = space.volume * rule.weights * np.exp(-(interior_points - space.center) @ q)
    interior_values = None

    rows = []
    for dof in space.functionals:
        if dof.kind == "edge":
            tau, _ = space.edge_tangent(dof)

            def integrand(points, dof=dof, tau=tau):
                values = np.asarray(fields(points), dtype=float) @ tau
                if dof.weight_vertex is not None:
                    values = values * space.barycentric(points)[:, dof.weight_vertex][None, :]
                return values

            rows.append(_edge_weighted_integral(space, dof, integrand, q, degree))
        else:
            if interior_values is None:
                interior_values = np.asarray(fields(interior_points), dtype=float)
            rows.append(interior_values[:, :, dof.component] @ interior_weights)
    return np.array(rows)


def weighted_dof_vector(space: NedelecSpace, field: VectorField, q: np.ndarray) -> np.ndarray:
    """
    <eta_j, e^{-q.(y - y_c)} field> for one field (Q, n) -> (Q, n), with the
    integration used for Z. For field = D^-1 J this is G(J).
    """
    return weighted_dof_matrix(space, lambda p: np.asarray(field(p), dtype=float)[None], q)[:, 0]


def build_Z(space: NedelecSpace, q: np.ndarray, D: np.ndarray) -> np.ndarray:
    """
    Z_jk = <eta_j, e^{-q.(y - y_c)} D^-1 phi_k>.

    Raises:
        InvalidCoefficientError: D is not symmetric positive definite.
        CoefficientOutOfRangeError: |q.(y_v - y_c)| > 700 on some vertex.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError:
        raise InvalidCoefficientError("D must be symmetric positive definite") from None
    D_inv = np.linalg.inv(D)
    return weighted_dof_matrix(space, lambda p: np.einsum("de,kqe->kqd", D_inv, space.basis_values(p)), q)


def exponential_means(space: NedelecSpace, q: np.ndarray) -> np.ndarray:
    """Mean of e^{-q.(y - y_c)} against each DOF weight (1 or lambda_a)."""
    q = np.asarray(q, dtype=float)
    check_exponent_range(space, q)
    zero = np.zeros_like(q)
    rule = simplex_quadrature(space.dim, 2 * space.order + 6)
    interior_mean = float(rule.weights @ np.exp(-(rule.points @ space.vertices - space.center) @ q))
    means = []
    for dof in space.functionals:
        if dof.kind != "edge":
            means.append(interior_mean)
            continue

        def weight(points, dof=dof):
            if dof.weight_vertex is None:
                return np.ones((1, len(points)))
            return space.barycentric(points)[:, dof.weight_vertex][None, :]

        weighted = _edge_weighted_integral(space, dof, weight, q, 1)[0]
        plain = _edge_weighted_integral(space, dof, weight, zero, 1)[0]
        means.append(weighted / plain)
    return np.array(means)


def adjoint_weights(space: NedelecSpace, q: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Diagonal of Lambda = Omega W^-1."""
    means = exponential_means(space, q)
    if space.order == 1:
        G = space.lambda_grads
        stiffness = space.volume * (G @ np.asarray(D, dtype=float) @ G.T)
        omega = np.array([-stiffness[dof.vertices] for dof in space.functionals])
    else:
        omega = np.ones(space.M)
    return omega / means


@dataclass(frozen=True)
class FluxRecovery:
    """Recovered flux coefficients with the element matrices that produced them."""
    P: np.ndarray
    Z: np.ndarray
    adjoint: np.ndarray
    factor: Tuple[np.ndarray, np.ndarray]  # LU of P* Z P
    condition: float
    c: np.ndarray                          # (M0,) or (M0, K)

    def flux_values(self, space: NedelecSpace, points: np.ndarray) -> np.ndarray:
        """J_T at points: (Q, n) for one right-hand side, (K, Q, n) for several."""
        psi = space.psi_values(points)
        if self.c.ndim == 1:
            return np.einsum("k,kqd->qd", self.c, psi)
        return np.einsum("km,kqd->mqd", self.c, psi)


def recover_flux(
    space: NedelecSpace,
    P: np.ndarray,
    Z: np.ndarray,
    d: np.ndarray,
    adjoint: Optional[np.ndarray] = None,
    element: Optional[int] = None,
) -> FluxRecovery:
    """
    Solve P* Z P c = P* d with P* = P^T diag(adjoint) (P^T when omitted).

    Raises:
        UnisolvenceError: P* Z P singular or with one-norm condition > 1e12.
    """
    adjoint = np.ones(space.M) if adjoint is None else np.asarray(adjoint, dtype=float)
    P_star = P.T * adjoint[None, :]
    system = P_star @ Z @ P
    element = space.element if element is None else element
    try:
        condition = float(np.linalg.cond(system, 1))
    except np.linalg.LinAlgError:
        condition = float("inf")
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise UnisolvenceError(condition, element)
    factor = lu_factor(system)
    c = lu_solve(factor, P_star @ np.asarray(d, dtype=float))
    return FluxRecovery(P=P, Z=Z, adjoint=adjoint, factor=factor, condition=condition, c=c)


def compute_d(u_local: np.ndarray, space: NedelecSpace, q: np.ndarray) -> np.ndarray:
    """
    d_j = <eta_j, grad(e^{-q.(y - y_c)} u_I)_I> from the local Lagrange values of
    u_I, shape (k,) or (k, K) for several fields at once.
    """
    q = np.asarray(q, dtype=float)
    check_exponent_range(space, q)
    weights = np.exp(-(space.lagrange_nodes - space.center) @ q)
    u_local = np.asarray(u_local, dtype=float)
    w = weights * u_local if u_local.ndim == 1 else weights[:, None] * u_local
    return space.grad_basis_map @ w
