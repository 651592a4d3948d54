"""
Time rescaling t~ = kappa t.

Dividing the equation by kappa gives a problem on (kappa t_min, kappa t_max) with
coefficients (K, beta, gamma, f) / kappa. The time block of D = diag(K, eps)
scales like kappa, so eps -> kappa eps keeps the perturbed space-time
operator, and therefore the exponentially fitted system, unchanged.
"""

import logging
from dataclasses import replace

import numpy as np

from app.core.exceptions import InvalidInputError
from app.problems.models import SpaceTimeProblem

logger = logging.getLogger(__name__)


def _unstretch(points: np.ndarray, kappa: float) -> np.ndarray:
    original = np.array(points, dtype=float, copy=True)
    original[:, -1] /= kappa
    return original


def _compose(func, kappa, factor=1.0):
    if func is None:
        return None
    if factor == 1.0:
        return lambda p: func(_unstretch(p, kappa))
    return lambda p: factor * np.asarray(func(_unstretch(p, kappa)))


def time_rescale(problem: SpaceTimeProblem, kappa: float) -> SpaceTimeProblem:
    """
    Rescaled problem; kappa = 1 returns the problem unchanged.

    Raises:
        InvalidInputError: kappa <= 0.
    """
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    kappa = float(kappa)
    if kappa == 1.0:
        return problem

    def rescale_coefficient(value):
        if callable(value):
            return _compose(value, kappa, 1.0 / kappa)
        return np.asarray(value, dtype=float) / kappa

    exact_gradient = None
    if problem.exact_gradient is not None:
        def exact_gradient(p, _g=problem.exact_gradient):
            g = np.array(_g(_unstretch(p, kappa)), dtype=float)
            g[:, -1] /= kappa
            return g

    logger.info(f"[RESCALE] {problem.name}: kappa={kappa}, t_max {problem.t_max} -> {kappa * problem.t_max}")
    return replace(
        problem,
        t_min=kappa * problem.t_min,
        t_max=kappa * problem.t_max,
        diffusion=rescale_coefficient(problem.diffusion),
        convection=rescale_coefficient(problem.convection),
        gamma=problem.gamma / kappa,
        eps=problem.eps * kappa,
        source=_compose(problem.source, kappa, 1.0 / kappa),
        boundary=_compose(problem.boundary, kappa),
        initial=_compose(problem.initial, kappa),
        exact=_compose(problem.exact, kappa),
        exact_gradient=exact_gradient,
        parameters=dict(problem.parameters, kappa=kappa),
    )


def rescale_nodes(vertices: np.ndarray, kappa: float) -> np.ndarray:
    """Map space-time nodes (x, t) to (x, kappa t)."""
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    out = np.array(vertices, dtype=float, copy=True)
    out[:, -1] *= kappa
    return out
