"""
End-to-end checks: convergence rates of the studies, nodal exactness of the
1D fitted scheme, agreement of the two lowest-order constructions, flux
recovery and unisolvence on random elements, the Bernoulli kernel, M-matrix
and coercivity diagnostics, and reproducible CSV output.
"""

import numpy as np
import pytest

from app.core.config import StudyConfig, apply_overrides
from app.mesh.builder import build_box_mesh
from app.problems.presets import heat1d, heat2d
from app.schemes.eafe_high import (
    adjoint_weights,
    build_P,
    build_Z,
    build_nedelec_space,
    local_high_order_matrix,
    recover_flux,
    weighted_dof_vector,
)
from app.schemes.eafe_low import EafeCoefficients, assemble_eafe, bernoulli, local_eafe_matrix, m_matrix_check
from app.schemes.sd import SdParameters, assemble_sd, energy_norm, sd_bilinear_form, zero_trace_vector
from app.services.single import run_single
from app.services.study import observed_order, run_convergence_study

from conftest import random_fitting_data, random_simplex
from test_eafe_high import CASES, flux_recovery_residual, random_q, random_spd

pytestmark = pytest.mark.acceptance

QUADRATIC_L2 = (1.75, 2.25)
QUADRATIC_H1 = (1.6, 2.4)


def make_config(directory, **sections) -> StudyConfig:
    overrides = {"output": {"directory": str(directory)}}
    for section, values in sections.items():
        overrides.setdefault(section, {}).update(values)
    return apply_overrides(StudyConfig(), overrides)


def heat2d_study(directory, scheme="eafe", **scheme_options):
    config = make_config(
        directory,
        problem={"preset": "heat2d", "eps": 1e-5},
        scheme={"name": scheme, "order": 1, **scheme_options},
        levels={"start": 1, "stop": 4},
    )
    return run_convergence_study(config)


@pytest.fixture(scope="module")
def eafe_heat_study(tmp_path_factory):
    directory = tmp_path_factory.mktemp("heat2d_eafe")
    return directory, heat2d_study(directory)


def assert_rate(table, column, band):
    errors = [getattr(row, column) for row in table.rows]
    assert all(row.ok for row in table.rows)
    assert all(fine < coarse for coarse, fine in zip(errors, errors[1:])), errors
    low, high = band
    assert low <= observed_order(errors[-2], errors[-1]) <= high, errors


@pytest.mark.slow
def test_eafe_heat_study_converges(eafe_heat_study):
    _, table = eafe_heat_study
    assert_rate(table, "l2_error", QUADRATIC_L2)


@pytest.mark.slow
def test_sd_heat_study_converges(tmp_path):
    table = heat2d_study(tmp_path, scheme="sd", theta=1e-2)
    assert_rate(table, "l2_error", QUADRATIC_L2)


@pytest.mark.parametrize("beta", [1.0, 10.0, 50.0])
@pytest.mark.parametrize("level", [2, 5])
def test_fitted_scheme_is_nodally_exact_in_1d(tmp_path, beta, level):
    config = make_config(
        tmp_path,
        problem={"preset": "boundary-layer-1d", "beta": beta},
        scheme={"name": "eafe", "order": 1},
        levels={"start": level, "stop": level},
        solver={"method": "dense"},
    )
    result = run_single(config)
    exact = result.problem.exact(result.mesh.vertices)
    assert np.abs(result.solution - exact).max() <= 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_lowest_order_constructions_agree(n):
    rng = np.random.default_rng(1000 + n)
    for _ in range(100):
        geom = random_simplex(rng, n)
        D, b, _ = random_fitting_data(rng, geom, max_qh=20.0)
        expected = local_eafe_matrix(geom, EafeCoefficients(D=D, b=b))
        actual = local_high_order_matrix(geom, D, b, 1)
        assert np.linalg.norm(actual - expected) <= 1e-10 * np.linalg.norm(expected)


@pytest.mark.slow
def test_polynomial_fluxes_are_recovered():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for sample in range(500):
        r, n = CASES[sample % len(CASES)]
        geom = random_simplex(rng, n)
        space = build_nedelec_space(geom, r)
        D = random_spd(rng, n)
        q = random_q(rng, n, geom.diameter, max_qh=50.0)
        worst = max(worst, flux_recovery_residual(space, D, q, rng.standard_normal(space.M0)))
    assert worst <= 1e-10


@pytest.mark.slow
def test_weighted_system_is_unisolvent():
    rng = np.random.default_rng(4048)
    conditions = []
    for sample in range(1000):
        r, n = CASES[sample % len(CASES)]
        geom = random_simplex(rng, n)
        space = build_nedelec_space(geom, r)
        D = random_spd(rng, n)
        q = random_q(rng, n, geom.diameter, max_qh=50.0)
        d = weighted_dof_vector(space, lambda p: np.ones((len(p), n)), q)
        recovery = recover_flux(space, build_P(space), build_Z(space, q, D), d,
                                adjoint=adjoint_weights(space, q, D))
        conditions.append(recovery.condition)
    assert np.all(np.isfinite(conditions))
    assert max(conditions) < 1e12


def test_bernoulli_kernel():
    assert bernoulli(0.0) == 1.0
    s = np.logspace(-12.0, np.log10(500.0), 4000)
    gap = bernoulli(s) - bernoulli(-s) + s
    assert np.all(np.abs(gap) <= 1e-12 * np.maximum(1.0, s))
    assert np.all(bernoulli(s) > 0)
    assert np.all(bernoulli(-s) > 0)


@pytest.mark.parametrize("level", range(1, 7))
def test_eafe_matrix_is_an_m_matrix_in_2d(level):
    system = assemble_eafe(build_box_mesh(1, 2 ** level), heat1d())
    report = m_matrix_check(system.matrix, exclude_rows=system.dirichlet_dofs)
    assert report.is_m_matrix, report.violating_entries[:5]


def coercivity_constant(level, samples=200):
    problem = heat2d()
    mesh = build_box_mesh(2, 2 ** level)
    params = SdParameters.from_problem(problem, theta=1e-2)
    system = assemble_sd(mesh, problem, params)
    rng = np.random.default_rng(level)
    ratios = []
    for _ in range(samples):
        v = zero_trace_vector(system, rng)
        ratios.append(sd_bilinear_form(system, v, v) / energy_norm(v, params, mesh) ** 2)
    return min(ratios)


def test_sd_form_is_coercive():
    coarse, fine = coercivity_constant(2), coercivity_constant(3)
    assert coarse > 0 and fine > 0
    assert 0.5 <= coarse / fine <= 2.0


@pytest.mark.slow
def test_high_order_rate(tmp_path):
    config = make_config(
        tmp_path,
        problem={"preset": "steady-cd2d"},
        scheme={"name": "eafe_high", "order": 2},
        levels={"start": 2, "stop": 4},
    )
    table = run_convergence_study(config, write=False)
    assert_rate(table, "h1_error", QUADRATIC_H1)
    # the nodal interpolant is approached one order faster
    assert_rate(table, "h1_interpolant", (2.4, 3.4))


@pytest.mark.slow
def test_study_csv_is_reproducible(eafe_heat_study, tmp_path):
    first_dir, _ = eafe_heat_study
    heat2d_study(tmp_path)
    assert (tmp_path / "convergence.csv").read_bytes() == (first_dir / "convergence.csv").read_bytes()
