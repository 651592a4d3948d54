"""
Single solves with exports, and the time-rescaling comparison.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from app.core.config import Settings, StudyConfig, get_settings
from app.core.exceptions import ConfigError
from app.fem.norms import ErrorNorms, error_norms, l2_norm
from app.linalg.solvers import SolverReport
from app.mesh.builder import scale_time_axis
from app.mesh.models import SimplicialMesh
from app.problems.models import AnyProblem, SpaceTimeProblem
from app.problems.rescale import rescale_nodes, time_rescale
from app.schemes.common import AssembledSystem
from app.schemes.eafe_low import MMatrixReport, m_matrix_check
from app.services.study import assemble, build_problem, check_scheme, level_cap, mesh_for_level, solve
from app.utils.exporters import default_slice_value, export_slice_csv, export_vtk, extract_slice

logger = logging.getLogger(__name__)

NONNEGATIVITY_TOL = -1e-8


@dataclass
class SingleRunResult:
    problem: AnyProblem
    mesh: SimplicialMesh
    system: AssembledSystem
    solution: np.ndarray
    report: SolverReport
    errors: Optional[ErrorNorms] = None
    m_matrix: Optional[MMatrixReport] = None
    vtk_path: Optional[Path] = None
    slice_path: Optional[Path] = None

    @property
    def minimum(self) -> float:
        return float(np.min(self.solution))

    @property
    def maximum(self) -> float:
        return float(np.max(self.solution))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.solution)))

    @property
    def nonnegative(self) -> bool:
        return self.minimum >= NONNEGATIVITY_TOL

    def to_dict(self) -> Dict[str, object]:
        return {
            "problem": self.problem.name,
            "scheme": self.system.scheme,
            "dofs": self.system.n_dofs,
            "min": self.minimum,
            "max": self.maximum,
            "finite": self.finite,
            "solver": self.report.to_dict(),
            "errors": self.errors.to_dict() if self.errors else None,
            "m_matrix": self.m_matrix.to_dict() if self.m_matrix else None,
            "vtk": str(self.vtk_path) if self.vtk_path else None,
            "slice": str(self.slice_path) if self.slice_path else None,
        }


def run_single(config: StudyConfig, level: Optional[int] = None, settings: Optional[Settings] = None) -> SingleRunResult:
    """
    Solve once at ``level`` (default ``levels.stop``), run the M-matrix check
    for the lowest-order fitted scheme, and write the VTK file and plane slice
    requested in ``config.output``.
    """
    settings = settings or get_settings()
    problem = build_problem(config)
    check_scheme(config, problem)
    level = config.levels.stop if level is None else int(level)
    if level > level_cap(problem.dim, settings) and not config.levels.large:
        raise ConfigError(f"level {level} exceeds the desk-scale cap; pass --large to run it")

    out_dir = Path(config.output.directory)
    mesh = mesh_for_level(problem, level)
    system = assemble(mesh, problem, config, dump_dir=out_dir / "elements")
    u, report = solve(system, config, settings)
    result = SingleRunResult(problem=problem, mesh=mesh, system=system, solution=u, report=report)

    if system.scheme == "eafe":
        result.m_matrix = m_matrix_check(system.matrix, exclude_rows=system.dirichlet_dofs)
    if problem.exact is not None:
        result.errors = error_norms(u, problem.exact, problem.exact_gradient, mesh, system.dofmap.order)
    if config.output.vtk:
        result.vtk_path = export_vtk(mesh, u, out_dir / config.output.vtk, title=f"{problem.name} level {level}")
    if config.output.slice_value is not None or config.output.vtk:
        axis = config.output.slice_axis
        if axis >= mesh.dim:
            raise ConfigError(f"slice axis {axis} outside 0..{mesh.dim - 1}")
        value = default_slice_value(mesh, axis, config.output.slice_value)
        data = extract_slice(mesh, u, axis, value)
        result.slice_path = export_slice_csv(data, out_dir / f"slice_axis{axis}.csv")

    logger.info(f"[SINGLE] {problem.name} level {level}: min={result.minimum:.6g} max={result.maximum:.6g} "
                f"converged={report.converged}")
    if result.m_matrix is not None and result.m_matrix.is_m_matrix and not result.nonnegative:
        logger.warning(f"[SINGLE] M-matrix check passed but min(u) = {result.minimum:.3e} < {NONNEGATIVITY_TOL}")
    return result


@dataclass
class RescaleReport:
    kappa: float
    n_nodes: int
    max_nodal_difference: float
    l2_squared_original: float
    l2_squared_rescaled: float

    @property
    def energy_ratio(self) -> float:
        if self.l2_squared_original == 0:
            return math.nan
        return self.l2_squared_rescaled / self.l2_squared_original

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "nodes": self.n_nodes,
            "max_nodal_difference": self.max_nodal_difference,
            "l2_squared_original": self.l2_squared_original,
            "l2_squared_rescaled": self.l2_squared_rescaled,
            "energy_ratio": self.energy_ratio,
        }


def run_rescale_demo(config: StudyConfig, kappa: float, level: Optional[int] = None,
                     settings: Optional[Settings] = None) -> RescaleReport:
    """
    Solve the preset and its time-rescaled version on the stretched mesh and
    compare nodal values under the node map (x, t) -> (x, kappa t).
    """
    settings = settings or get_settings()
    problem = build_problem(config)
    if not isinstance(problem, SpaceTimeProblem):
        raise ConfigError(f"rescale-demo needs a space-time preset, got {problem.name}")
    check_scheme(config, problem)
    level = config.levels.start if level is None else int(level)

    mesh = mesh_for_level(problem, level)
    u, _ = solve(assemble(mesh, problem, config), config, settings)
    stretched = scale_time_axis(mesh, kappa)
    rescaled = time_rescale(problem, kappa)
    u_tilde, _ = solve(assemble(stretched, rescaled, config), config, settings)

    if not np.allclose(rescale_nodes(mesh.vertices, kappa), stretched.vertices, rtol=0.0, atol=1e-12):
        raise ConfigError("stretched mesh does not match the node map")
    r = config.scheme.order
    report = RescaleReport(
        kappa=float(kappa),
        n_nodes=len(u),
        max_nodal_difference=float(np.max(np.abs(u_tilde - u))),
        l2_squared_original=l2_norm(u, mesh, r) ** 2,
        l2_squared_rescaled=l2_norm(u_tilde, stretched, r) ** 2,
    )
    logger.info(f"[RESCALE] kappa={kappa}: max nodal difference {report.max_nodal_difference:.3e}, "
                f"energy ratio {report.energy_ratio:.12g}")
    return report
