"""
Preset problems with manufactured or closed-form solutions.

Manufactured sources come from substituting the exact solution into
u_t - div(K grad u - beta u) + gamma u = f (or its stationary analogue).
"""

import inspect
import logging
from typing import Callable, Dict

import numpy as np

from app.core.exceptions import ConfigError
from app.mesh.models import ALL_ROLES
from app.problems.models import AnyProblem, SpaceTimeProblem, StationaryProblem, zero_field

logger = logging.getLogger(__name__)

PI = np.pi


def heat2d(eps: float = 1e-5) -> SpaceTimeProblem:
    """
    U = exp(-t) sin(pi x) sin(pi y) on (0,1)^2 x (0,1), K = I, beta = 0,
    gamma = 0. U_t = -U and -Laplace U = 2 pi^2 U, so f = (2 pi^2 - 1) U.
    """
    def exact(p):
        return np.exp(-p[:, 2]) * np.sin(PI * p[:, 0]) * np.sin(PI * p[:, 1])

    def gradient(p):
        x, y, t = p[:, 0], p[:, 1], p[:, 2]
        e = np.exp(-t)
        return np.stack([
            PI * e * np.cos(PI * x) * np.sin(PI * y),
            PI * e * np.sin(PI * x) * np.cos(PI * y),
            -e * np.sin(PI * x) * np.sin(PI * y),
        ], axis=1)

    return SpaceTimeProblem(
        name="heat2d",
        space_dim=2,
        t_max=1.0,
        spatial_extents=((0.0, 1.0), (0.0, 1.0)),
        diffusion=np.eye(2),
        convection=np.zeros(2),
        gamma=0.0,
        eps=eps,
        source=lambda p: (2.0 * PI ** 2 - 1.0) * exact(p),
        boundary=exact,
        initial=exact,
        exact=exact,
        exact_gradient=gradient,
    )


def heat1d(eps: float = 1e-5) -> SpaceTimeProblem:
    """U = exp(-t) sin(pi x), f = (pi^2 - 1) U."""
    def exact(p):
        return np.exp(-p[:, 1]) * np.sin(PI * p[:, 0])

    def gradient(p):
        x, t = p[:, 0], p[:, 1]
        return np.stack([PI * np.exp(-t) * np.cos(PI * x), -np.exp(-t) * np.sin(PI * x)], axis=1)

    return SpaceTimeProblem(
        name="heat1d",
        space_dim=1,
        t_max=1.0,
        spatial_extents=((0.0, 1.0),),
        diffusion=np.eye(1),
        convection=np.zeros(1),
        eps=eps,
        source=lambda p: (PI ** 2 - 1.0) * exact(p),
        boundary=exact,
        initial=exact,
        exact=exact,
        exact_gradient=gradient,
    )


def zero(space_dim: int = 2, eps: float = 1e-5) -> SpaceTimeProblem:
    """Homogeneous data; the solution is identically zero."""
    n = space_dim + 1
    return SpaceTimeProblem(
        name="zero",
        space_dim=space_dim,
        t_max=1.0,
        spatial_extents=tuple((0.0, 1.0) for _ in range(space_dim)),
        diffusion=np.eye(space_dim),
        convection=np.zeros(space_dim),
        eps=eps,
        exact=zero_field,
        exact_gradient=lambda p: np.zeros((len(p), n)),
    )


def oscillating_convection(eps: float = 1e-5, amplitude: float = 100.0, frequency: float = 6.0) -> SpaceTimeProblem:
    """
    beta(t) = (amplitude sin(frequency pi t), 0) on (0,1)^2 x (0,1), f = 1,
    homogeneous boundary and initial data. Convection dominated except near
    the zeros of the sine.
    """
    def beta(p):
        out = np.zeros((len(p), 2))
        out[:, 0] = amplitude * np.sin(frequency * PI * p[:, 2])
        return out

    return SpaceTimeProblem(
        name="oscillating-convection",
        space_dim=2,
        t_max=1.0,
        spatial_extents=((0.0, 1.0), (0.0, 1.0)),
        diffusion=np.eye(2),
        convection=beta,
        eps=eps,
        source=lambda p: np.ones(len(p)),
        constant_coefficients=False,
        parameters={"amplitude": amplitude, "frequency": frequency},
    )


def boundary_layer_1d(beta: float = 10.0) -> StationaryProblem:
    """
    -(u' - beta u)' = 0 on (0, 1), u(0) = 0, u(1) = 1.
    The flux u' - beta u is constant: u = (exp(beta x) - 1) / (exp(beta) - 1).
    """
    beta = float(beta)

    def exact(p):
        return np.expm1(beta * p[:, 0]) / np.expm1(beta)

    def gradient(p):
        return (beta * np.exp(beta * p[:, 0]) / np.expm1(beta)).reshape(-1, 1)

    return StationaryProblem(
        name="boundary-layer-1d",
        dim=1,
        extents=((0.0, 1.0),),
        diffusion=np.eye(1),
        convection=np.array([beta]),
        dirichlet=exact,
        dirichlet_roles=ALL_ROLES,
        exact=exact,
        exact_gradient=gradient,
    )


def steady_cd2d(bx: float = 6.0, by: float = 3.0) -> StationaryProblem:
    """
    -div(grad u - b u) = f on the unit square with constant b, u = sin(pi x) sin(pi y).
    div(b u) = b . grad u for constant b, so f = 2 pi^2 u + b . grad u.
    """
    b = np.array([bx, by], dtype=float)

    def exact(p):
        return np.sin(PI * p[:, 0]) * np.sin(PI * p[:, 1])

    def gradient(p):
        x, y = p[:, 0], p[:, 1]
        return np.stack([PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)], axis=1)

    return StationaryProblem(
        name="steady-cd2d",
        dim=2,
        extents=((0.0, 1.0), (0.0, 1.0)),
        diffusion=np.eye(2),
        convection=b,
        source=lambda p: 2.0 * PI ** 2 * exact(p) + gradient(p) @ b,
        dirichlet=exact,
        dirichlet_roles=ALL_ROLES,
        exact=exact,
        exact_gradient=gradient,
    )


PRESETS: Dict[str, Callable[..., AnyProblem]] = {
    "heat2d": heat2d,
    "heat1d": heat1d,
    "zero": zero,
    "oscillating-convection": oscillating_convection,
    "boundary-layer-1d": boundary_layer_1d,
    "steady-cd2d": steady_cd2d,
}


def available_presets():
    return sorted(PRESETS)


def get_preset(name: str, **params) -> AnyProblem:
    """
    Build a preset; parameters the preset does not accept, or that are None,
    are ignored.
    """
    factory = PRESETS.get(name)
    if factory is None:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    accepted = inspect.signature(factory).parameters
    kwargs = {k: v for k, v in params.items() if v is not None and k in accepted}
    logger.debug(f"[PROBLEM] preset {name} with {kwargs}")
    return factory(**kwargs)
