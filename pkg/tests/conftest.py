"""
Shared fixtures: seeded generators, well-shaped random simplices and small
study configurations writing into pytest's tmp_path.
"""

from math import factorial

import numpy as np
import pytest

from app.core.config import StudyConfig, apply_overrides
from app.fem.geometry import element_geometry_from_vertices
from app.mesh.builder import build_box_mesh


def random_simplex(rng: np.random.Generator, n: int, box: float = 0.4, min_quality: float = 0.05):
    """
    Vertices drawn uniformly in [0, box]^n, rejecting flat elements whose
    volume is below ``min_quality`` times diam^n / n!.
    """
    while True:
        vertices = rng.uniform(0.0, box, size=(n + 1, n))
        edges = vertices[:, None, :] - vertices[None, :, :]
        diam = np.linalg.norm(edges, axis=-1).max()
        volume = abs(np.linalg.det((vertices[1:] - vertices[0]).T)) / factorial(n)
        if volume >= min_quality * diam ** n / factorial(n):
            return element_geometry_from_vertices(vertices)


def random_fitting_data(rng: np.random.Generator, geom, max_qh: float, eps_range=(1e-3, 1.0)):
    """D = diag(1, ..., eps) with log-uniform eps, and b = D q with |q| h <= max_qh."""
    n = geom.dim
    eps = 10.0 ** rng.uniform(np.log10(eps_range[0]), np.log10(eps_range[1]))
    D = np.eye(n)
    D[-1, -1] = eps
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    q = direction * rng.uniform(0.0, max_qh) / geom.diameter
    return D, D @ q, q


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def square_mesh():
    """1D space + time, 4 x 4 Kuhn mesh of the unit square."""
    return build_box_mesh(1, 4)


@pytest.fixture
def cube_mesh():
    """2D space + time, 2 x 2 x 2 Kuhn mesh of the unit cube."""
    return build_box_mesh(2, 2)


@pytest.fixture
def study_config(tmp_path):
    """Factory for study configurations with the output under tmp_path."""
    def make(**sections) -> StudyConfig:
        overrides = {"output": {"directory": str(tmp_path / "out")}}
        for section, values in sections.items():
            overrides.setdefault(section, {}).update(values)
        return apply_overrides(StudyConfig(), overrides)
    return make
