import numpy as np
import pytest

from app.core.exceptions import ConfigError, InvalidCoefficientError, InvalidInputError
from app.mesh.builder import build_box_mesh
from app.mesh.models import DIRICHLET_ROLES, BoundaryRole
from app.problems import (
    SpaceTimeProblem,
    as_stationary,
    available_presets,
    get_preset,
    rescale_nodes,
    time_rescale,
)
from app.problems.presets import boundary_layer_1d, heat1d, heat2d, oscillating_convection, steady_cd2d

STEP = 1e-4


def partial(f, points, axis, step=STEP):
    shift = np.zeros(points.shape[1])
    shift[axis] = step
    return (f(points + shift) - f(points - shift)) / (2 * step)


def second_partial(f, points, axis, step=1e-3):
    shift = np.zeros(points.shape[1])
    shift[axis] = step
    return (f(points + shift) - 2 * f(points) + f(points - shift)) / step ** 2


@pytest.fixture
def interior_points(rng):
    return rng.uniform(0.1, 0.9, size=(20, 3))


def test_heat2d_source_matches_the_equation(interior_points):
    problem = heat2d()
    u = problem.exact
    residual = (
        partial(u, interior_points, 2)
        - second_partial(u, interior_points, 0)
        - second_partial(u, interior_points, 1)
        - problem.source(interior_points)
    )
    assert np.abs(residual).max() < 1e-4


def test_heat1d_source_matches_the_equation(interior_points):
    problem = heat1d()
    p = interior_points[:, :2]
    residual = partial(problem.exact, p, 1) - second_partial(problem.exact, p, 0) - problem.source(p)
    assert np.abs(residual).max() < 1e-4


def test_steady_cd2d_source_matches_the_equation(interior_points):
    problem = steady_cd2d()
    p = interior_points[:, :2]
    b = np.asarray(problem.convection)
    u = problem.exact
    # -Laplace u + div(b u) with constant b
    residual = (
        -second_partial(u, p, 0) - second_partial(u, p, 1)
        + b[0] * partial(u, p, 0) + b[1] * partial(u, p, 1)
        - problem.source(p)
    )
    assert np.abs(residual).max() < 1e-4


@pytest.mark.parametrize("factory,dim", [(heat2d, 3), (heat1d, 2), (steady_cd2d, 2)])
def test_exact_gradients_match_finite_differences(rng, factory, dim):
    problem = factory()
    p = rng.uniform(0.1, 0.9, size=(10, dim))
    numeric = np.stack([partial(problem.exact, p, k) for k in range(dim)], axis=1)
    assert np.allclose(problem.exact_gradient(p), numeric, atol=1e-6)


@pytest.mark.parametrize("beta", [1.0, 10.0, 50.0])
def test_boundary_layer_solution_has_constant_flux(beta):
    problem = boundary_layer_1d(beta)
    x = np.linspace(0.0, 1.0, 11).reshape(-1, 1)
    u = problem.exact(x)
    assert u[0] == 0.0
    assert u[-1] == pytest.approx(1.0, rel=1e-14)
    flux = problem.exact_gradient(x)[:, 0] - beta * u
    assert np.allclose(flux, flux[0], rtol=1e-12, atol=1e-12)


def test_space_time_problem_as_stationary():
    problem = heat2d(eps=1e-3)
    stationary = as_stationary(problem)
    points = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.5]])
    D = stationary.diffusion_at(points)
    assert D.shape == (2, 3, 3)
    assert np.allclose(D[0], np.diag([1.0, 1.0, 1e-3]))
    assert np.allclose(stationary.convection_at(points), [[0.0, 0.0, 1.0]] * 2)
    assert stationary.dirichlet_roles == DIRICHLET_ROLES
    assert stationary.extents[-1] == (0.0, 1.0)
    assert as_stationary(stationary) is stationary


def test_initial_data_wins_on_the_initial_face():
    problem = SpaceTimeProblem(
        name="split-data",
        space_dim=1,
        t_max=1.0,
        spatial_extents=((0.0, 1.0),),
        diffusion=np.eye(1),
        convection=np.zeros(1),
        boundary=lambda p: np.full(len(p), 2.0),
        initial=lambda p: np.full(len(p), 7.0),
    )
    values = problem.space_time_dirichlet(np.array([[0.0, 0.0], [0.0, 0.5], [1.0, 1.0]]))
    assert values.tolist() == [7.0, 2.0, 2.0]


def test_initial_face_follows_a_shifted_time_interval():
    problem = SpaceTimeProblem(
        name="shifted",
        space_dim=1,
        t_max=1.5,
        spatial_extents=((0.0, 1.0),),
        diffusion=np.eye(1),
        convection=np.zeros(1),
        boundary=lambda p: np.full(len(p), 2.0),
        initial=lambda p: np.full(len(p), 7.0),
        t_min=0.5,
    )
    assert problem.extents[-1] == (0.5, 1.5)
    mesh = build_box_mesh(1, 4, problem.extents)
    initial = np.unique(mesh.boundary_facets[mesh.facets_with_role(BoundaryRole.DIRICHLET_INITIAL)])
    lateral = np.unique(mesh.boundary_facets[mesh.facets_with_role(BoundaryRole.DIRICHLET_LATERAL)])
    assert np.allclose(mesh.vertices[initial, 1], 0.5)
    assert np.all(problem.space_time_dirichlet(mesh.vertices[initial]) == 7.0)
    above = lateral[mesh.vertices[lateral, 1] > 0.5]
    assert np.all(problem.space_time_dirichlet(mesh.vertices[above]) == 2.0)
    with pytest.raises(InvalidInputError):
        SpaceTimeProblem("bad", 1, 0.5, ((0, 1),), np.eye(1), np.zeros(1), t_min=0.5)


def test_time_rescale_stretches_a_shifted_interval():
    stretched = time_rescale(SpaceTimeProblem("shifted", 1, 2.0, ((0, 1),), np.eye(1), np.zeros(1), t_min=1.0), 3.0)
    assert stretched.extents[-1] == (3.0, 6.0)


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        SpaceTimeProblem("bad", 3, 1.0, ((0, 1),) * 3, np.eye(3), np.zeros(3))
    with pytest.raises(InvalidInputError):
        SpaceTimeProblem("bad", 1, 0.0, ((0, 1),), np.eye(1), np.zeros(1))
    with pytest.raises(InvalidCoefficientError):
        SpaceTimeProblem("bad", 1, 1.0, ((0, 1),), np.eye(1), np.zeros(1), gamma=-1.0)
    with pytest.raises(InvalidCoefficientError):
        heat1d().to_stationary(eps=0.0)


def test_scalar_alpha():
    assert heat2d().scalar_alpha() == 1.0
    anisotropic = SpaceTimeProblem("aniso", 2, 1.0, ((0, 1), (0, 1)), np.diag([1.0, 2.0]), np.zeros(2))
    with pytest.raises(InvalidCoefficientError):
        anisotropic.scalar_alpha()


def test_oscillating_convection_field():
    problem = oscillating_convection()
    beta = problem.convection_at(np.array([[0.3, 0.3, 1.0 / 12.0], [0.3, 0.3, 0.0]]))
    assert np.allclose(beta, [[100.0, 0.0], [0.0, 0.0]])


def test_time_rescale_identity_and_validation():
    problem = heat1d()
    assert time_rescale(problem, 1.0) is problem
    for kappa in (0.0, -2.0):
        with pytest.raises(InvalidInputError):
            time_rescale(problem, kappa)


def test_time_rescale_maps_data(rng):
    problem = heat1d(eps=1e-4)
    kappa = 3.0
    stretched = time_rescale(problem, kappa)
    assert stretched.t_max == 3.0
    assert stretched.eps == pytest.approx(3e-4)
    assert np.allclose(stretched.diffusion, np.eye(1) / 3.0)
    assert stretched.parameters["kappa"] == 3.0
    p = rng.uniform(0.0, 1.0, size=(8, 2))
    p_tilde = rescale_nodes(p, kappa)
    assert np.allclose(stretched.exact(p_tilde), problem.exact(p))
    assert np.allclose(stretched.source(p_tilde), problem.source(p) / kappa)
    grad = stretched.exact_gradient(p_tilde)
    assert np.allclose(grad[:, 0], problem.exact_gradient(p)[:, 0])
    assert np.allclose(grad[:, 1], problem.exact_gradient(p)[:, 1] / kappa)


def test_time_rescale_keeps_the_stationary_operator_scaling():
    problem = heat1d(eps=1e-4)
    stretched = time_rescale(problem, 2.0).to_stationary()
    D = stretched.diffusion_at(np.zeros((1, 2)))[0]
    assert np.allclose(D, np.diag([0.5, 2e-4]))


def test_presets_registry():
    assert set(available_presets()) == {
        "heat1d", "heat2d", "zero", "oscillating-convection", "boundary-layer-1d", "steady-cd2d",
    }
    assert get_preset("boundary-layer-1d", beta=5.0, eps=1.0).convection.tolist() == [5.0]
    assert get_preset("heat2d", eps=None).eps == 1e-5
    assert get_preset("zero", space_dim=1).dim == 2
    with pytest.raises(ConfigError):
        get_preset("burgers")
