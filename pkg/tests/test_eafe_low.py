import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import InvalidCoefficientError, MeshConsistencyError
from app.fem.geometry import local_diffusion_matrix
from app.mesh.builder import build_box_mesh
from app.problems.presets import heat1d, heat2d, oscillating_convection
from app.schemes.eafe_low import (
    EafeCoefficients,
    assemble_eafe,
    bernoulli,
    local_eafe_matrix,
    m_matrix_check,
)

from conftest import random_fitting_data, random_simplex


def test_bernoulli_at_zero_is_exactly_one():
    assert bernoulli(0.0) == 1.0
    assert isinstance(bernoulli(0.0), float)


@pytest.mark.parametrize("s", [1e-12, -1e-12, 1e-9, 1e-4, -1e-4, 1e-3])
def test_bernoulli_near_zero_matches_series(s):
    series = 1.0 - s / 2.0 + s ** 2 / 12.0 - s ** 4 / 720.0
    assert bernoulli(s) == pytest.approx(series, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(s=st.floats(-700.0, 700.0, allow_nan=False))
def test_bernoulli_reflection_identity(s):
    # B(s) - B(-s) = -s
    assert bernoulli(s) - bernoulli(-s) == pytest.approx(-s, rel=1e-13, abs=1e-13)


def test_bernoulli_positive_and_decreasing():
    s = np.linspace(-700.0, 700.0, 14001)
    values = bernoulli(s)
    assert np.all(values > 0)
    assert np.all(np.isfinite(values))
    assert np.all(np.diff(values) < 0)


def test_bernoulli_large_arguments():
    assert bernoulli(500.5) == pytest.approx(500.5 * np.exp(-500.5), rel=1e-14)
    assert bernoulli(-800.0) == pytest.approx(800.0, rel=1e-14)
    assert bernoulli(np.array([[0.0, 1.0]])).shape == (1, 2)


def test_bernoulli_continuity_across_branches():
    for edge in (1e-8, 500.0):
        below, above = bernoulli(edge * (1 - 1e-12)), bernoulli(edge * (1 + 1e-12))
        assert above == pytest.approx(below, rel=1e-10)


def test_coefficients_validation():
    with pytest.raises(InvalidCoefficientError):
        EafeCoefficients(D=np.array([[1.0, 0.5], [0.0, 1.0]]), b=np.zeros(2))
    with pytest.raises(InvalidCoefficientError):
        EafeCoefficients(D=np.diag([1.0, 0.0]), b=np.zeros(2))
    with pytest.raises(InvalidCoefficientError):
        EafeCoefficients(D=np.eye(2), b=np.zeros(3))
    with pytest.raises(InvalidCoefficientError):
        EafeCoefficients(D=np.eye(2), b=np.zeros(2), gamma=-1.0)
    with pytest.raises(InvalidCoefficientError):
        EafeCoefficients.space_time(np.eye(1), [0.0], eps=0.0)


def test_space_time_coefficients():
    coeff = EafeCoefficients.space_time(2.0 * np.eye(2), [1.0, -1.0], eps=1e-4)
    assert np.allclose(coeff.D, np.diag([2.0, 2.0, 1e-4]))
    assert np.allclose(coeff.b, [1.0, -1.0, 1.0])
    assert np.allclose(coeff.q, [0.5, -0.5, 1e4])


@pytest.mark.parametrize("n", [2, 3])
def test_zero_convection_reduces_to_diffusion_matrix(rng, n):
    geom = random_simplex(rng, n)
    D = np.diag(np.linspace(1.0, 0.1, n))
    coeff = EafeCoefficients(D=D, b=np.zeros(n))
    assert np.allclose(local_eafe_matrix(geom, coeff), local_diffusion_matrix(geom, D), rtol=1e-14, atol=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.sampled_from([2, 3]))
def test_local_matrix_columns_sum_to_zero(seed, n):
    # rows are test functions, so the column sums test against the constant 1
    rng = np.random.default_rng(seed)
    geom = random_simplex(rng, n)
    D, b, _ = random_fitting_data(rng, geom, max_qh=20.0)
    A = local_eafe_matrix(geom, EafeCoefficients(D=D, b=b))
    scale = np.abs(A).max()
    assert np.allclose(A.sum(axis=0), 0.0, atol=1e-11 * scale)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.sampled_from([2, 3]))
def test_local_matrix_annihilates_exponential_profile(seed, n):
    rng = np.random.default_rng(seed)
    geom = random_simplex(rng, n)
    D, b, q = random_fitting_data(rng, geom, max_qh=10.0)
    A = local_eafe_matrix(geom, EafeCoefficients(D=D, b=b))
    # u = exp(q . y) has zero flux D grad u - b u, so it is in the kernel
    u = np.exp(geom.vertex_coords @ q - (geom.vertex_coords @ q).max())
    assert np.allclose(A @ u, 0.0, atol=1e-11 * np.abs(A).max())


def test_local_matrix_upwinds_along_time():
    geom = random_simplex(np.random.default_rng(3), 2)
    coeff = EafeCoefficients.space_time(np.eye(1), [0.0], eps=1e-5)
    A = local_eafe_matrix(geom, coeff)
    assert np.all(np.isfinite(A))
    d = local_diffusion_matrix(geom, coeff.D)
    off = ~np.eye(3, dtype=bool)
    # Off-diagonals keep the sign of the diffusion matrix
    assert np.all(A[off] * d[off] >= 0)


def test_m_matrix_check_small_cases():
    assert m_matrix_check(np.eye(3)).is_m_matrix
    assert m_matrix_check(np.array([[1.0, -0.5], [-0.5, 1.0]])).is_m_matrix
    report = m_matrix_check(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert not report.is_m_matrix
    assert {v[3] for v in report.violating_entries} == {"positive off-diagonal"}
    report = m_matrix_check(np.array([[1.0, -2.0], [0.0, 1.0]]))
    assert not report.is_m_matrix
    assert report.violating_entries[0][3] == "not diagonally dominant"
    assert m_matrix_check(np.array([[1.0, -2.0], [0.0, 1.0]]), exclude_rows=np.array([0])).is_m_matrix


def test_heat1d_system_is_an_m_matrix():
    mesh = build_box_mesh(1, 8)
    system = assemble_eafe(mesh, heat1d())
    report = m_matrix_check(system.matrix, exclude_rows=system.dirichlet_dofs)
    assert report.is_m_matrix
    assert report.checked_rows == len(system.free_dofs)


def test_heat2d_system_dimensions():
    mesh = build_box_mesh(2, 2)
    system = assemble_eafe(mesh, heat2d())
    assert system.matrix.shape == (27, 27)
    # only (0.5, 0.5, t) with t in {0.5, 1} is free
    assert len(system.free_dofs) == 1 * 1 * 2
    assert np.all(system.matrix.diagonal() > 0)


def test_variable_convection_is_assembled():
    mesh = build_box_mesh(2, 2)
    system = assemble_eafe(mesh, oscillating_convection())
    assert np.all(np.isfinite(system.matrix.data))
    assert np.all(np.isfinite(system.rhs))


def test_unclassified_mesh_rejected():
    mesh = build_box_mesh(1, 2, classify=False)
    with pytest.raises(MeshConsistencyError):
        assemble_eafe(mesh, heat1d())
