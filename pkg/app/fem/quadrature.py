"""
Simplex quadrature by conical products of Gauss-Jacobi rules.

The reference simplex {x >= 0, sum(x) <= 1} is collapsed onto the unit cube
with x_1 = s_1, x_k = s_k * prod_{i<k} (1 - s_i); the Jacobian factor
(1 - s_k)^(n - k) becomes the Jacobi weight of the k-th direction. All
weights are positive and any degree is available.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

from app.core.exceptions import InvalidInputError, StfemError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates; weights sum to 1 (reference measure)."""
    dim: int
    points: np.ndarray   # (Q, dim+1)
    weights: np.ndarray  # (Q,)
    exact_degree: int

    @property
    def n_points(self) -> int:
        return int(self.weights.shape[0])

    def physical_points(self, coords: np.ndarray) -> np.ndarray:
        """Map to elements with vertex coordinates (E, n+1, n) -> (E, Q, n)."""
        return np.einsum("qi,eid->eqd", self.points, coords)


def _gauss_jacobi_unit(m: int, alpha: int):
    """m-point rule on [0, 1] for the weight (1 - s)^alpha."""
    x, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (1.0 + x), w / 2.0 ** (alpha + 1)


def monomial_integral(alpha) -> float:
    """Mean of x^alpha over the reference simplex: n! alpha! / (|alpha| + n)!."""
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha)
    num = factorial(n)
    for a in alpha:
        num *= factorial(a)
    return num / factorial(sum(alpha) + n)


def _multi_indices(n: int, degree: int):
    for alpha in product(range(degree + 1), repeat=n):
        if sum(alpha) <= degree:
            yield alpha


def _validate(rule: QuadratureRule, tol: float = 1e-13) -> None:
    x = rule.points[:, 1:]
    worst = 0.0
    for alpha in _multi_indices(rule.dim, rule.exact_degree):
        approx = float(rule.weights @ np.prod(x ** np.array(alpha), axis=1))
        err = abs(approx - monomial_integral(alpha))
        worst = max(worst, err)
        if err > tol:
            raise StfemError(
                f"quadrature rule dim={rule.dim} degree={rule.exact_degree} fails on x^{alpha}: error {err:.2e}"
            )
    logger.debug(f"[QUAD] dim={rule.dim} degree={rule.exact_degree} points={rule.n_points} max error {worst:.1e}")


@lru_cache(maxsize=None)
def simplex_quadrature(dim: int, degree: int) -> QuadratureRule:
    """
    Positive-weight rule on the ``dim``-simplex exact up to total ``degree``.
    Validated against closed-form monomial means when built.
    """
    if dim < 0 or degree < 0:
        raise InvalidInputError(f"invalid quadrature request dim={dim} degree={degree}")
    if dim == 0:
        return QuadratureRule(0, np.ones((1, 1)), np.ones(1), degree)

    m = max(1, (degree + 2) // 2)
    factors = [_gauss_jacobi_unit(m, dim - k) for k in range(1, dim + 1)]
    points, weights = [], []
    for idx in product(range(m), repeat=dim):
        s = [factors[k][0][i] for k, i in enumerate(idx)]
        w = np.prod([factors[k][1][i] for k, i in enumerate(idx)])
        x, remaining = [], 1.0
        for sk in s:
            x.append(sk * remaining)
            remaining *= 1.0 - sk
        points.append(x)
        weights.append(w)
    x = np.array(points)
    weights = np.array(weights) * factorial(dim)
    bary = np.hstack([1.0 - x.sum(axis=1, keepdims=True), x])
    rule = QuadratureRule(dim=dim, points=bary, weights=weights, exact_degree=degree)
    _validate(rule)
    return rule


@lru_cache(maxsize=None)
def gauss_legendre_unit(n_points: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (1.0 + x), 0.5 * w
