"""
Problem data models.

A parabolic problem u_t - div(K grad u - beta u) + gamma u = f on
Omega_s x (t_min, t_max) is stored as a SpaceTimeProblem and recast as the
stationary convection-diffusion problem -div(D grad u - b u) + gamma u = f
in n = d_s + 1 dimensions with D = diag(K, eps) and b = (beta, 1). All
callables take points of shape (N, n), time last, and return arrays with the
leading dimension N.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, FrozenSet, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import InvalidCoefficientError, InvalidInputError
from app.mesh.models import ALL_ROLES, DIRICHLET_ROLES, BoundaryRole

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]
Coefficient = Union[np.ndarray, float, Callable[[np.ndarray], np.ndarray]]


def _matrix_field(value: Coefficient, n: int, points: np.ndarray) -> np.ndarray:
    if callable(value):
        out = np.asarray(value(points), dtype=float)
    else:
        out = np.broadcast_to(np.asarray(value, dtype=float).reshape(n, n), (len(points), n, n))
    return out.reshape(len(points), n, n)


def _vector_field(value: Coefficient, n: int, points: np.ndarray) -> np.ndarray:
    if callable(value):
        out = np.asarray(value(points), dtype=float)
    else:
        out = np.broadcast_to(np.asarray(value, dtype=float).reshape(n), (len(points), n))
    return out.reshape(len(points), n)


def zero_field(points: np.ndarray) -> np.ndarray:
    return np.zeros(len(points))


@dataclass(frozen=True)
class StationaryProblem:
    """-div(D grad u - b u) + gamma u = f with Dirichlet data on selected roles."""
    name: str
    dim: int
    extents: Tuple[Tuple[float, float], ...]
    diffusion: Coefficient
    convection: Coefficient
    gamma: float = 0.0
    source: ScalarField = zero_field
    dirichlet: ScalarField = zero_field
    dirichlet_roles: FrozenSet[BoundaryRole] = ALL_ROLES
    exact: Optional[ScalarField] = None
    exact_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant_coefficients: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidCoefficientError(f"gamma must be non-negative, got {self.gamma}")
        if len(self.extents) != self.dim:
            raise InvalidInputError(f"{self.name}: {len(self.extents)} extents for dimension {self.dim}")

    def diffusion_at(self, points: np.ndarray) -> np.ndarray:
        return _matrix_field(self.diffusion, self.dim, points)

    def convection_at(self, points: np.ndarray) -> np.ndarray:
        return _vector_field(self.convection, self.dim, points)


@dataclass(frozen=True)
class SpaceTimeProblem:
    """
    u_t - div(K grad u - beta u) + gamma u = f on (t_min, t_max), u = g on
    the lateral boundary, u = u0 at t = t_min.
    """
    name: str
    space_dim: int
    t_max: float
    spatial_extents: Tuple[Tuple[float, float], ...]
    diffusion: Coefficient
    convection: Coefficient
    gamma: float = 0.0
    eps: float = 1e-5
    source: ScalarField = zero_field
    boundary: ScalarField = zero_field
    initial: ScalarField = zero_field
    exact: Optional[ScalarField] = None
    exact_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant_coefficients: bool = True
    parameters: dict = field(default_factory=dict)
    t_min: float = 0.0

    def __post_init__(self):
        if self.space_dim not in (1, 2):
            raise InvalidInputError(f"space_dim must be 1 or 2, got {self.space_dim}")
        if self.t_max <= self.t_min:
            raise InvalidInputError(f"t_max must exceed t_min, got ({self.t_min}, {self.t_max})")
        if self.gamma < 0:
            raise InvalidCoefficientError(f"gamma must be non-negative, got {self.gamma}")
        if len(self.spatial_extents) != self.space_dim:
            raise InvalidInputError(f"{self.name}: expected {self.space_dim} spatial extents")

    @property
    def dim(self) -> int:
        return self.space_dim + 1

    @property
    def extents(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(self.spatial_extents) + ((float(self.t_min), float(self.t_max)),)

    def diffusion_at(self, points: np.ndarray) -> np.ndarray:
        """K at space-time points, shape (N, d_s, d_s)."""
        return _matrix_field(self.diffusion, self.space_dim, points)

    def convection_at(self, points: np.ndarray) -> np.ndarray:
        """beta at space-time points, shape (N, d_s)."""
        return _vector_field(self.convection, self.space_dim, points)

    def scalar_alpha(self) -> float:
        """alpha when K = alpha I with constant alpha, else an error."""
        if callable(self.diffusion):
            raise InvalidCoefficientError(f"{self.name}: variable diffusion, alpha is undefined")
        K = np.asarray(self.diffusion, dtype=float).reshape(self.space_dim, self.space_dim)
        alpha = float(K[0, 0])
        if not np.allclose(K, alpha * np.eye(self.space_dim), rtol=0, atol=1e-14 * max(1.0, abs(alpha))):
            raise InvalidCoefficientError(f"{self.name}: K is not a multiple of the identity")
        return alpha

    def space_time_dirichlet(self, points: np.ndarray) -> np.ndarray:
        """u0 on t = t_min, g elsewhere on the Dirichlet boundary."""
        points = np.atleast_2d(points)
        tol = 1e-12 * max(abs(self.t_min), abs(self.t_max))
        at_initial = np.abs(points[:, -1] - self.t_min) <= tol
        out = np.asarray(self.boundary(points), dtype=float).copy()
        if np.any(at_initial):
            out[at_initial] = np.asarray(self.initial(points[at_initial]), dtype=float)
        return out

    def to_stationary(self, eps: Optional[float] = None) -> StationaryProblem:
        """
        D = diag(K, eps), b = (beta, 1). The eps-block makes D invertible.
        """
        eps = self.eps if eps is None else float(eps)
        if not eps > 0:
            raise InvalidCoefficientError(f"eps must be positive, got {eps}")
        ds, n = self.space_dim, self.dim

        def diffusion(points):
            D = np.zeros((len(points), n, n))
            D[:, :ds, :ds] = self.diffusion_at(points)
            D[:, ds, ds] = eps
            return D

        def convection(points):
            return np.hstack([self.convection_at(points), np.ones((len(points), 1))])

        return StationaryProblem(
            name=self.name,
            dim=n,
            extents=self.extents,
            diffusion=diffusion,
            convection=convection,
            gamma=self.gamma,
            source=self.source,
            dirichlet=self.space_time_dirichlet,
            dirichlet_roles=DIRICHLET_ROLES,
            exact=self.exact,
            exact_gradient=self.exact_gradient,
            constant_coefficients=self.constant_coefficients,
        )

    def with_eps(self, eps: float) -> "SpaceTimeProblem":
        return replace(self, eps=float(eps))


AnyProblem = Union[SpaceTimeProblem, StationaryProblem]


def as_stationary(problem: AnyProblem) -> StationaryProblem:
    return problem.to_stationary() if isinstance(problem, SpaceTimeProblem) else problem
