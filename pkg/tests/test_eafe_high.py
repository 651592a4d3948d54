from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import CoefficientOutOfRangeError, InvalidInputError, UnsupportedOrderError
from app.fem.quadrature import gauss_legendre_unit, simplex_quadrature
from app.mesh.builder import build_box_mesh
from app.problems.presets import heat1d, heat2d, steady_cd2d
from app.schemes.eafe_high import (
    adjoint_weights,
    assemble_high_order,
    build_P,
    build_Z,
    build_nedelec_space,
    compute_d,
    dof_apply,
    dump_element_matrices,
    edge_exponential_moments,
    high_order_element,
    load_element_matrices,
    local_high_order_matrix,
    reconstruction_residual,
    recover_flux,
    weighted_dof_vector,
)
from app.schemes.eafe_high.nedelec import dof_matrix, monomial_exponents
from app.schemes.eafe_low import EafeCoefficients, local_eafe_matrix

from conftest import random_fitting_data, random_simplex

CASES = [(1, 2), (1, 3), (2, 2)]


def random_spd(rng, n, low=0.5, high=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(rng.uniform(low, high, n)) @ Q.T


def random_q(rng, n, h, max_qh):
    direction = rng.standard_normal(n)
    return direction / np.linalg.norm(direction) * rng.uniform(0.0, max_qh) / h


def flux_recovery_residual(space, D, q, c_true):
    """Relative L2 distance between a polynomial flux and its recovery."""
    D_inv = np.linalg.inv(D)

    def flux(points):
        return np.einsum("k,kqd->qd", c_true, space.psi_values(points))

    d = weighted_dof_vector(space, lambda p: flux(p) @ D_inv.T, q)
    P = build_P(space)
    recovery = recover_flux(space, P, build_Z(space, q, D), d, adjoint=adjoint_weights(space, q, D))
    rule = simplex_quadrature(space.dim, 2 * space.order)
    points = rule.points @ space.vertices
    diff = recovery.flux_values(space, points) - flux(points)
    exact = flux(points)
    return np.sqrt(rule.weights @ np.sum(diff ** 2, axis=1) / (rule.weights @ np.sum(exact ** 2, axis=1)))


def test_monomial_exponents_are_graded():
    assert monomial_exponents(2, 1) == ((0, 0), (1, 0), (0, 1))
    assert len(monomial_exponents(3, 2)) == 10


@pytest.mark.parametrize("r,n", CASES)
def test_space_dimensions(rng, r, n):
    space = build_nedelec_space(random_simplex(rng, n), r)
    expected_m = {(1, 2): 3, (1, 3): 6, (2, 2): 8}[(r, n)]
    assert space.M == expected_m
    assert space.M0 == n * len(monomial_exponents(n, r - 1))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), case=st.sampled_from(CASES))
def test_basis_is_dual_to_the_dofs(seed, case):
    r, n = case
    space = build_nedelec_space(random_simplex(np.random.default_rng(seed), n), r)
    duality = dof_matrix(space, space.basis_values)
    assert np.abs(duality - np.eye(space.M)).max() < 1e-11


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), case=st.sampled_from(CASES))
def test_flux_basis_is_reconstructed(seed, case):
    r, n = case
    space = build_nedelec_space(random_simplex(np.random.default_rng(seed), n), r)
    P = build_P(space)
    assert P.shape == (space.M, space.M0)
    assert reconstruction_residual(space, P).max() < 1e-10


def test_unsupported_pairs_rejected(rng):
    with pytest.raises(UnsupportedOrderError):
        build_nedelec_space(random_simplex(rng, 3), 2)
    with pytest.raises(UnsupportedOrderError):
        assemble_high_order(build_box_mesh(2, 1), heat2d(eps=1.0), r=2)


@pytest.mark.parametrize("a", [-30.0, -4.5, -3.9, -1.0, 0.0, 0.5, 3.9, 4.1, 10.0])
def test_edge_exponential_moments(a):
    s, w = gauss_legendre_unit(40)
    expected = np.array([w @ (np.exp(a * s) * s ** k) for k in range(5)])
    np.testing.assert_allclose(edge_exponential_moments(a, 4), expected, rtol=1e-11)


@pytest.mark.parametrize("n", [2, 3])
def test_lowest_order_matches_bernoulli_kernel(n):
    rng = np.random.default_rng(7 + n)
    for _ in range(10):
        geom = random_simplex(rng, n)
        D, b, _ = random_fitting_data(rng, geom, max_qh=20.0)
        expected = local_eafe_matrix(geom, EafeCoefficients(D=D, b=b))
        actual = local_high_order_matrix(geom, D, b, 1)
        assert np.linalg.norm(actual - expected) <= 1e-10 * np.linalg.norm(expected)


@pytest.mark.parametrize("r,n", CASES)
def test_polynomial_flux_is_recovered(r, n):
    rng = np.random.default_rng(100 * r + n)
    for _ in range(10):
        geom = random_simplex(rng, n)
        D = random_spd(rng, n)
        q = random_q(rng, n, geom.diameter, max_qh=50.0)
        space = build_nedelec_space(geom, r)
        c_true = rng.standard_normal(space.M0)
        assert flux_recovery_residual(space, D, q, c_true) <= 1e-10


def test_lowest_order_system_is_a_scaled_identity(rng):
    geom = random_simplex(rng, 3)
    D = random_spd(rng, 3)
    q = random_q(rng, 3, geom.diameter, max_qh=30.0)
    space = build_nedelec_space(geom, 1)
    P = build_P(space)
    Z = build_Z(space, q, D)
    weights = adjoint_weights(space, q, D)
    system = (P.T * weights[None, :]) @ Z @ P
    assert np.allclose(system, geom.volume * np.eye(3), rtol=0, atol=1e-9 * geom.volume)


@pytest.mark.parametrize("r", [1, 2])
def test_local_matrix_does_not_depend_on_the_exponent_centre(rng, r):
    geom = random_simplex(rng, 2)
    D = random_spd(rng, 2)
    b = D @ random_q(rng, 2, geom.diameter, max_qh=5.0)
    reference = local_high_order_matrix(geom, D, b, r)
    shifted = local_high_order_matrix(geom, D, b, r, center=geom.vertex_coords[0])
    assert np.allclose(shifted, reference, rtol=0, atol=1e-9 * np.abs(reference).max())


@pytest.mark.parametrize("r", [1, 2])
def test_local_matrix_kills_constants_without_convection(rng, r):
    geom = random_simplex(rng, 2)
    A = local_high_order_matrix(geom, np.eye(2), np.zeros(2), r)
    assert np.allclose(A @ np.ones(A.shape[1]), 0.0, atol=1e-10 * np.abs(A).max())


def test_exponent_out_of_range(rng):
    geom = random_simplex(rng, 2)
    with pytest.raises(CoefficientOutOfRangeError):
        high_order_element(geom, np.eye(2), np.array([1e6, 0.0]), 1)
    with pytest.raises(CoefficientOutOfRangeError):
        assemble_high_order(build_box_mesh(1, 2), heat1d(eps=1e-5), r=1)


def test_dump_round_trip(tmp_path, rng):
    geom = random_simplex(rng, 2)
    element = high_order_element(geom, np.eye(2), np.array([1.0, 2.0]), 2, element=3)
    path = dump_element_matrices(tmp_path / "dumps" / "element_3.txt", 3, element.P, element.Z, element.matrix)
    loaded = load_element_matrices(path)
    assert int(loaded["element"]) == 3
    assert np.array_equal(loaded["P"], element.P)
    assert np.array_equal(loaded["Z"], element.Z)
    assert np.array_equal(loaded["A_T"], element.matrix)


def test_assembly_with_element_dumps(tmp_path):
    mesh = build_box_mesh(1, 2)
    system = assemble_high_order(mesh, steady_cd2d(), r=2, dump_elements=[0, 5], dump_dir=tmp_path)
    assert system.n_dofs == 25
    assert np.all(np.isfinite(system.matrix.data))
    assert (tmp_path / "element_0.txt").exists()
    assert (tmp_path / "element_5.txt").exists()
    with pytest.raises(InvalidInputError):
        assemble_high_order(mesh, steady_cd2d(), r=2, dump_elements=[0])


@pytest.mark.parametrize("n", [2, 3])
def test_compute_d_lowest_order_is_an_edge_difference(rng, n):
    geom = random_simplex(rng, n)
    space = build_nedelec_space(geom, 1)
    q = random_q(rng, n, geom.diameter, max_qh=10.0)
    u = rng.standard_normal(n + 1)
    d = compute_d(u, space, q)
    w = np.exp(-(geom.vertex_coords - space.center) @ q) * u
    expected = [w[b] - w[a] for a, b in combinations(range(n + 1), 2)]
    np.testing.assert_allclose(d, expected, rtol=1e-12, atol=1e-12 * np.abs(w).max())


def test_compute_d_without_convection_takes_gradient_moments(rng):
    geom = random_simplex(rng, 2)
    space = build_nedelec_space(geom, 2)
    g = np.array([0.7, -1.3])
    u = space.lagrange_nodes @ g + 2.0
    d = compute_d(u, space, np.zeros(2))
    expected = []
    for a, b in combinations(range(3), 2):
        half = 0.5 * (geom.vertex_coords[b] - geom.vertex_coords[a]) @ g
        expected.extend([half, half])
    expected.extend(geom.volume * g)
    np.testing.assert_allclose(d, expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_dof_vector_of_the_flux_matches_compute_d(rng, n):
    # for linear u the weighted moments of D^-1 J equal the moments of grad(e^{-q.y} u)_I
    geom = random_simplex(rng, n)
    space = build_nedelec_space(geom, 1)
    q = random_q(rng, n, geom.diameter, max_qh=5.0)
    g = rng.standard_normal(n)

    def u(points):
        return points @ g + 1.0

    from_flux = weighted_dof_vector(space, lambda p: g[None, :] - np.outer(u(p), q), q)
    from_nodes = compute_d(u(geom.vertex_coords), space, q)
    np.testing.assert_allclose(from_flux, from_nodes, rtol=1e-9, atol=1e-12)


def test_dof_apply_on_edges(rng):
    geom = random_simplex(rng, 3)
    space = build_nedelec_space(geom, 1)
    v0 = np.array([0.3, -1.0, 2.0])
    for j, (a, b) in enumerate(combinations(range(4), 2)):
        edge = geom.vertex_coords[b] - geom.vertex_coords[a]
        assert dof_apply(space, j, lambda p: np.tile(v0, (len(p), 1))) == pytest.approx(edge @ v0, rel=1e-13)
        for k in range(4):
            grad = geom.lambda_grads[k]
            expected = float(k == b) - float(k == a)
            assert dof_apply(space, j, lambda p: np.tile(grad, (len(p), 1))) == pytest.approx(expected, abs=1e-12)


def test_dof_apply_interior_moment_of_a_linear_field(rng):
    geom = random_simplex(rng, 2)
    space = build_nedelec_space(geom, 2)
    A = rng.standard_normal((2, 2))
    c = rng.standard_normal(2)

    def field(points):
        return points @ A.T + c

    for j, dof in enumerate(space.functionals):
        if dof.kind == "interior":
            expected = geom.volume * field(geom.barycenter[None, :])[0, dof.component]
            assert dof_apply(space, j, field) == pytest.approx(expected, rel=1e-11, abs=1e-13)
