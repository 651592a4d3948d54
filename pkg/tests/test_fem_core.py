import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import DegenerateElementError, UnsupportedOrderError
from app.fem.geometry import (
    batch_geometry,
    compute_element_geometry,
    element_geometry_from_vertices,
    local_diffusion_matrix,
)
from app.fem.lagrange import (
    boundary_dofs,
    build_dofmap,
    lagrange_interpolate,
    local_dof_count,
    reference_nodes,
    shape_derivatives,
    shape_functions,
)
from app.fem.norms import error_norms, facet_l2_norm_sq, h1_seminorm, l2_norm
from app.fem.quadrature import monomial_integral, simplex_quadrature
from app.mesh.builder import build_box_mesh
from app.mesh.models import DIRICHLET_ROLES, BoundaryRole

from conftest import random_simplex


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [0, 1, 2, 5, 8])
def test_quadrature_weights_positive_and_normalized(dim, degree):
    rule = simplex_quadrature(dim, degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(rule.points.sum(axis=1), 1.0)


def test_quadrature_integrates_monomials_exactly():
    rule = simplex_quadrature(3, 6)
    x = rule.points[:, 1:]
    for alpha in [(6, 0, 0), (2, 2, 2), (1, 3, 0), (0, 0, 5)]:
        approx = rule.weights @ np.prod(x ** np.array(alpha), axis=1)
        assert approx == pytest.approx(monomial_integral(alpha), rel=1e-10)


def test_monomial_integral_closed_form():
    # mean of x over the triangle is 1/3, of x^2 is 1/6
    assert monomial_integral((1, 0)) == pytest.approx(1 / 3)
    assert monomial_integral((2, 0)) == pytest.approx(1 / 6)


def test_unit_right_triangle_geometry():
    geom = element_geometry_from_vertices(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert geom.det == pytest.approx(1.0)
    assert geom.volume == pytest.approx(0.5)
    expected = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(geom.lambda_grads, expected)
    assert geom.diameter == pytest.approx(np.sqrt(2.0))
    assert [(e.i, e.j) for e in geom.edges] == [(0, 1), (0, 2), (1, 2)]


def test_degenerate_element_rejected():
    with pytest.raises(DegenerateElementError):
        element_geometry_from_vertices(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.sampled_from([2, 3]))
def test_barycentric_gradients_sum_to_zero(seed, n):
    geom = random_simplex(np.random.default_rng(seed), n)
    assert np.allclose(geom.lambda_grads.sum(axis=0), 0.0, atol=1e-10 / geom.diameter)
    lam = geom.barycentric(geom.vertex_coords)
    assert np.allclose(lam, np.eye(n + 1), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.sampled_from([2, 3]))
def test_local_diffusion_matrix_symmetric_with_zero_rows(seed, n):
    rng = np.random.default_rng(seed)
    geom = random_simplex(rng, n)
    A = rng.standard_normal((n, n))
    D = A @ A.T + n * np.eye(n)
    d = local_diffusion_matrix(geom, D)
    scale = np.abs(d).max()
    assert np.allclose(d, d.T, atol=1e-13 * scale)
    assert np.allclose(d.sum(axis=1), 0.0, atol=1e-12 * scale)
    assert np.all(np.linalg.eigvalsh(d) > -1e-12 * scale)


def test_batch_geometry_matches_single_element(cube_mesh):
    batch = batch_geometry(cube_mesh)
    single = compute_element_geometry(cube_mesh, 7)
    assert batch.volumes[7] == pytest.approx(single.volume)
    assert np.allclose(batch.grads[7], single.lambda_grads)
    assert batch.volumes.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("r", [1, 2])
def test_shape_functions_nodal_and_partition_of_unity(n, r):
    nodes = reference_nodes(n, r)
    assert nodes.shape[0] == local_dof_count(n, r)
    N = shape_functions(n, r, nodes)
    assert np.allclose(N, np.eye(len(nodes)), atol=1e-14)
    lam = np.random.default_rng(1).dirichlet(np.ones(n + 1), size=5)
    assert np.allclose(shape_functions(n, r, lam).sum(axis=1), 1.0)
    # the gradient of the sum vanishes: equal derivative in every barycentric direction
    total = shape_derivatives(n, r, lam).sum(axis=1)
    assert np.allclose(total, total[:, :1])


def test_unsupported_lagrange_order():
    with pytest.raises(UnsupportedOrderError):
        reference_nodes(2, 3)


def test_p2_dofmap_shares_edge_nodes(square_mesh):
    dofmap = build_dofmap(square_mesh, 2)
    edges, _ = square_mesh.edge_table
    assert dofmap.n_dofs == square_mesh.n_vertices + len(edges)
    assert dofmap.element_dofs.shape == (square_mesh.n_simplices, 6)
    # every edge node is the midpoint of its element edge
    for e in range(3):
        coords = dofmap.node_coords[dofmap.element_dofs[e]]
        assert np.allclose(coords[3], 0.5 * (coords[0] + coords[1]))
        assert np.allclose(coords[5], 0.5 * (coords[1] + coords[2]))


def test_boundary_dofs_cover_dirichlet_faces(square_mesh):
    dofmap = build_dofmap(square_mesh, 2)
    dofs = boundary_dofs(square_mesh, dofmap, DIRICHLET_ROLES)
    coords = dofmap.node_coords[dofs]
    on_boundary = (np.isclose(coords[:, 0], 0) | np.isclose(coords[:, 0], 1) | np.isclose(coords[:, 1], 0))
    assert np.all(on_boundary)
    # 3 sides of a 4 x 4 grid carry 12 segments, i.e. 13 vertices and 12 midpoints
    assert len(dofs) == 25


@pytest.mark.parametrize("r", [1, 2])
def test_interpolation_of_polynomials_is_exact(r):
    mesh = build_box_mesh(1, 3)

    def f(p):
        return 1.0 + 2.0 * p[:, 0] - p[:, 1] + (r - 1) * p[:, 0] * p[:, 1]

    def grad(p):
        return np.stack([2.0 + (r - 1) * p[:, 1], -1.0 + (r - 1) * p[:, 0]], axis=1)

    u = lagrange_interpolate(f, mesh, r)
    norms = error_norms(u, f, grad, mesh, r)
    assert norms.l2 < 1e-13
    assert norms.h1_semi < 1e-12


def test_norms_of_linear_field():
    mesh = build_box_mesh(1, 2)
    u = lagrange_interpolate(lambda p: p[:, 0], mesh, 1)
    # ||x||^2 on the unit square is 1/3, |x|_1^2 is 1
    assert l2_norm(u, mesh, 1) == pytest.approx(np.sqrt(1 / 3), rel=1e-13)
    assert h1_seminorm(u, mesh, 1) == pytest.approx(1.0, rel=1e-13)
    assert h1_seminorm(u, mesh, 1, components=[1]) == pytest.approx(0.0, abs=1e-14)


def test_final_trace_norm():
    mesh = build_box_mesh(1, 4)
    u = lagrange_interpolate(lambda p: p[:, 1] * p[:, 0], mesh, 2)
    # u(x, 1) = x, so the squared trace norm on t = 1 is 1/3
    assert facet_l2_norm_sq(u, mesh, 2, BoundaryRole.OUTFLOW_FINAL) == pytest.approx(1 / 3, rel=1e-12)


def test_p2_convergence_of_interpolant():
    errors = []
    for divisions in (4, 8):
        mesh = build_box_mesh(1, divisions)
        f = lambda p: np.sin(np.pi * p[:, 0]) * np.exp(-p[:, 1])
        u = lagrange_interpolate(f, mesh, 2)
        errors.append(error_norms(u, f, None, mesh, 2).l2)
    assert np.log2(errors[0] / errors[1]) == pytest.approx(3.0, abs=0.3)


def test_kuhn_cube_volumes():
    mesh = build_box_mesh(2, 1)
    assert batch_geometry(mesh).volumes == pytest.approx(np.full(6, 1 / 6))
