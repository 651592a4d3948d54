"""
Streamline-diffusion (Petrov-Galerkin) discretization of the space-time
problem with constant alpha, beta, gamma.

With b = (beta, 1) and L u = b . grad u - alpha Laplace_x u + gamma u:

    B_h(u, v) = sum_T int_T alpha grad_x u . grad_x v + (b . grad u) v + gamma u v
                + tau_T int_T (L u)(b . grad v),
    F_h(v)    = sum_T int_T f (v + tau_T b . grad v),

tau_T = theta h_T^p nu, nu = 1 / sqrt(|beta|^2 + 1), h_T the element diameter.
The Laplacian is taken elementwise (it vanishes for P1).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.core.exceptions import InvalidCoefficientError, UnsupportedOrderError
from app.fem.geometry import ElementGeometry, GeometryBatch, batch_geometry, geometry_from_coords
from app.fem.lagrange import (
    build_dofmap,
    evaluate_at_quadrature,
    physical_gradients,
    shape_derivatives,
    shape_functions,
    shape_hessians,
)
from app.fem.norms import facet_l2_norm_sq
from app.fem.quadrature import simplex_quadrature
from app.mesh.models import BoundaryRole, SimplicialMesh
from app.problems.models import SpaceTimeProblem
from app.schemes.common import AssembledSystem, finish_system, require_classified

logger = logging.getLogger(__name__)

DEFAULT_THETA = 1e-2


def sd_select_p(r: int, alpha: float) -> int:
    """Stabilization exponent: 1 for P1 or alpha = 0, otherwise 2."""
    if r not in (1, 2):
        raise UnsupportedOrderError(r)
    return 1 if (r == 1 or alpha == 0) else 2


@dataclass(frozen=True)
class SdParameters:
    alpha: float
    beta: np.ndarray
    gamma: float = 0.0
    theta: float = DEFAULT_THETA
    order: int = 1
    p: int = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if self.alpha < 0 or self.gamma < 0:
            raise InvalidCoefficientError("alpha and gamma must be non-negative")
        if self.theta < 0:
            raise InvalidCoefficientError(f"theta must be non-negative, got {self.theta}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "p", sd_select_p(self.order, self.alpha))
        object.__setattr__(self, "nu", 1.0 / np.sqrt(float(beta @ beta) + 1.0))

    @property
    def b(self) -> np.ndarray:
        return np.append(self.beta, 1.0)

    def tau(self, h) -> np.ndarray:
        return self.theta * np.asarray(h, dtype=float) ** self.p * self.nu

    @classmethod
    def from_problem(cls, problem: SpaceTimeProblem, theta: float = DEFAULT_THETA, order: int = 1) -> "SdParameters":
        """Constant K = alpha I, beta and gamma only."""
        if not problem.constant_coefficients or callable(problem.convection):
            raise InvalidCoefficientError(f"{problem.name}: streamline diffusion needs constant coefficients")
        return cls(
            alpha=problem.scalar_alpha(),
            beta=np.asarray(problem.convection, dtype=float).ravel(),
            gamma=problem.gamma,
            theta=theta,
            order=order,
        )


def _sd_matrices(geometry: GeometryBatch, params: SdParameters, h: np.ndarray) -> np.ndarray:
    n, r = geometry.dim, params.order
    rule = simplex_quadrature(n, 2 * r)
    N = shape_functions(n, r, rule.points)                                             # (Q, k)
    G = physical_gradients(shape_derivatives(n, r, rule.points), geometry.grads)       # (E, Q, k, n)
    lap_x = np.einsum("ekdd->ek", shape_hessians(n, r, geometry.grads)[:, :, :n - 1, :n - 1])
    b = params.b
    bG = G @ b                                                                          # (E, Q, k)
    Gx = G[..., :n - 1]
    w = rule.weights

    galerkin = (
        params.alpha * np.einsum("q,eqid,eqjd->eji", w, Gx, Gx)
        + np.einsum("q,eqi,qj->eji", w, bG, N)
        + params.gamma * np.einsum("q,qi,qj->ji", w, N, N)[None]
    )
    residual = bG - params.alpha * lap_x[:, None, :] + params.gamma * N[None]           # L phi_i, (E, Q, k)
    stab = np.einsum("q,eqi,eqj->eji", w, residual, bG)
    tau = params.tau(h)
    return geometry.volumes[:, None, None] * (galerkin + tau[:, None, None] * stab)


def local_sd_matrix(geom: ElementGeometry, params: SdParameters, h: Optional[float] = None) -> np.ndarray:
    """Local matrix, rows indexed by test functions; ``h`` defaults to the element diameter."""
    batch = geometry_from_coords(geom.vertex_coords[None])
    h_arr = np.array([geom.diameter if h is None else float(h)])
    return _sd_matrices(batch, params, h_arr)[0]


def _sd_rhs(geometry: GeometryBatch, params: SdParameters, source, h: np.ndarray) -> np.ndarray:
    n, r = geometry.dim, params.order
    rule = simplex_quadrature(n, max(4, 2 * r + 2))
    N = shape_functions(n, r, rule.points)
    G = physical_gradients(shape_derivatives(n, r, rule.points), geometry.grads)
    points = rule.physical_points(geometry.coords)
    f = np.asarray(source(points.reshape(-1, n)), dtype=float).reshape(points.shape[:2])
    test = N[None] + params.tau(h)[:, None, None] * (G @ params.b)
    return geometry.volumes[:, None] * np.einsum("q,eq,eqj->ej", rule.weights, f, test)


def assemble_sd(mesh: SimplicialMesh, problem: SpaceTimeProblem, params: SdParameters) -> AssembledSystem:
    """
    Global SD system with Dirichlet elimination on the lateral and initial
    boundaries; nothing is imposed or added at t = t_max.
    """
    require_classified(mesh)
    if not problem.constant_coefficients or callable(problem.diffusion) or callable(problem.convection):
        raise InvalidCoefficientError(f"{problem.name}: streamline diffusion needs constant coefficients")
    geometry = batch_geometry(mesh)
    h = geometry.diameters
    local = _sd_matrices(geometry, params, h)
    rhs = _sd_rhs(geometry, params, problem.source, h)
    dofmap = build_dofmap(mesh, params.order)
    stationary = problem.to_stationary()
    logger.debug(f"[SD] theta={params.theta} p={params.p} nu={params.nu:.4f} max tau={params.tau(h).max():.3e}")
    return finish_system(mesh, dofmap, stationary, local, rhs, scheme="sd")


def sd_bilinear_form(system: AssembledSystem, u: np.ndarray, v: np.ndarray) -> float:
    """B_h(u, v) from the unreduced matrix (rows are test functions)."""
    return float(np.asarray(v) @ (system.raw_matrix @ np.asarray(u)))


def energy_norm(u_h: np.ndarray, params: SdParameters, mesh: SimplicialMesh) -> float:
    """
    |||u|||^2 = ||u(T)||^2 + int alpha |grad_x u|^2 + h^p nu |b . grad u|^2 + gamma u^2,
    with the final-time trace integrated over the OUTFLOW_FINAL facets.
    """
    require_classified(mesh)
    n, r = mesh.dim, params.order
    geometry = batch_geometry(mesh)
    dofmap = build_dofmap(mesh, r)
    rule = simplex_quadrature(n, 2 * r)
    values, gradients = evaluate_at_quadrature(u_h, dofmap, geometry.grads, rule.points)
    scale = geometry.volumes[:, None] * rule.weights[None, :]
    weight = geometry.diameters[:, None] ** params.p * params.nu
    volume_part = np.sum(scale * (
        params.alpha * np.sum(gradients[..., :n - 1] ** 2, axis=-1)
        + weight * (gradients @ params.b) ** 2
        + params.gamma * values ** 2
    ))
    trace = facet_l2_norm_sq(u_h, mesh, r, BoundaryRole.OUTFLOW_FINAL)
    return float(np.sqrt(trace + volume_part))


def zero_trace_vector(system: AssembledSystem, rng: np.random.Generator) -> np.ndarray:
    """Random coefficient vector vanishing on the Dirichlet DOFs (coercivity checks)."""
    v = rng.standard_normal(system.n_dofs)
    v[system.dirichlet_dofs] = 0.0
    return v

