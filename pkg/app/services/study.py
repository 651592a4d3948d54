"""
Convergence studies: build the preset, assemble and solve on a family of
uniformly refined meshes and tabulate the errors with observed orders.

Level L uses 2^L cells per axis, so h halves from one level to the next and
the observed order between consecutive levels is log2(e_L / e_{L+1}).
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from tabulate import tabulate

from app.core.config import Settings, StudyConfig, get_settings
from app.core.exceptions import ConfigError, StfemError
from app.fem.lagrange import lagrange_interpolate
from app.fem.norms import error_norms, h1_seminorm
from app.linalg.solvers import SolverReport, solve_linear_system
from app.mesh.builder import build_box_mesh, build_interval_mesh
from app.mesh.models import SimplicialMesh
from app.problems.models import AnyProblem, SpaceTimeProblem
from app.problems.presets import get_preset
from app.problems.rescale import time_rescale
from app.schemes.common import AssembledSystem
from app.schemes.eafe_high import assemble_high_order
from app.schemes.eafe_low import assemble_eafe
from app.schemes.sd import SdParameters, assemble_sd
from app.utils.exporters import export_csv

logger = logging.getLogger(__name__)

CSV_HEADER = ("level", "h", "dofs", "l2_error", "h1_error", "order_l2", "order_h1", "iters", "seconds")


# ---------------------------------------------------------------------------
# Building blocks shared with single runs
# ---------------------------------------------------------------------------

def build_problem(config: StudyConfig) -> AnyProblem:
    section = config.problem
    problem = get_preset(section.preset, eps=section.eps, beta=section.beta, space_dim=section.space_dim)
    if section.kappa != 1.0:
        if not isinstance(problem, SpaceTimeProblem):
            raise ConfigError(f"kappa applies to space-time presets only, {section.preset} is stationary")
        problem = time_rescale(problem, section.kappa)
    return problem


def level_cap(dim: int, settings: Settings) -> int:
    return settings.max_level_3d if dim >= 3 else settings.max_level_2d


def mesh_for_level(problem: AnyProblem, level: int) -> SimplicialMesh:
    """2^level cells per axis on the problem's box."""
    divisions = 2 ** int(level)
    if isinstance(problem, SpaceTimeProblem):
        return build_box_mesh(problem.space_dim, divisions, problem.extents)
    if problem.dim == 1:
        return build_interval_mesh(divisions, problem.extents[0])
    if problem.dim == 2:
        return build_box_mesh(1, divisions, problem.extents)
    raise ConfigError(f"no box mesh for a stationary problem of dimension {problem.dim}")


def check_scheme(config: StudyConfig, problem: AnyProblem) -> None:
    """Scheme/preset combinations that cannot run at any level."""
    scheme = config.scheme
    if scheme.name == "sd" and not isinstance(problem, SpaceTimeProblem):
        raise ConfigError(f"streamline diffusion needs a space-time preset, got {problem.name}")
    if scheme.name == "eafe" and scheme.order != 1:
        raise ConfigError("scheme 'eafe' is the lowest-order scheme; use 'eafe_high' for order 2")


def assemble(mesh: SimplicialMesh, problem: AnyProblem, config: StudyConfig, dump_dir: Optional[Path] = None) -> AssembledSystem:
    check_scheme(config, problem)
    scheme = config.scheme
    if scheme.name == "sd":
        return assemble_sd(mesh, problem, SdParameters.from_problem(problem, theta=scheme.theta, order=scheme.order))
    if scheme.name == "eafe":
        return assemble_eafe(mesh, problem, lump_mass=scheme.lump_mass)
    dumps = config.output.dump_elements
    return assemble_high_order(mesh, problem, r=scheme.order, lump_mass=scheme.lump_mass,
                               dump_elements=dumps, dump_dir=dump_dir if dumps else None)


def solve(system: AssembledSystem, config: StudyConfig, settings: Settings) -> Tuple[np.ndarray, SolverReport]:
    solver = config.solver
    return solve_linear_system(
        system.matrix,
        system.rhs,
        method=solver.method,
        tol=solver.tol,
        restart=solver.restart,
        max_iter=solver.max_iter,
        preconditioner=solver.preconditioner,
        dense_limit=settings.dense_threshold,
    )


# ---------------------------------------------------------------------------
# Convergence table
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    level: int
    h: float
    dofs: int = 0
    l2_error: float = math.nan
    h1_error: float = math.nan
    order_l2: float = math.nan
    order_h1: float = math.nan
    iters: int = 0
    seconds: float = 0.0
    h1_interpolant: float = math.nan  # |u_I - u_h|_H1
    residual: float = math.nan
    status: str = "ok"
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self):
        return asdict(self)


def observed_order(coarse: float, fine: float, level_gap: int = 1) -> float:
    if not (coarse > 0 and fine > 0) or not (math.isfinite(coarse) and math.isfinite(fine)):
        return math.nan
    return math.log2(coarse / fine) / level_gap


@dataclass
class ConvergenceTable:
    scheme: str
    preset: str
    rows: List[ConvergenceRow] = field(default_factory=list)

    def compute_orders(self) -> None:
        for prev, row in zip(self.rows, self.rows[1:]):
            if prev.ok and row.ok:
                gap = row.level - prev.level
                row.order_l2 = observed_order(prev.l2_error, row.l2_error, gap)
                row.order_h1 = observed_order(prev.h1_error, row.h1_error, gap)

    @property
    def failed(self) -> bool:
        return any(not row.ok for row in self.rows)

    def latest_order(self, column: str = "order_l2") -> float:
        values = [getattr(row, column) for row in self.rows if math.isfinite(getattr(row, column))]
        return values[-1] if values else math.nan

    def csv_rows(self, deterministic: bool = True):
        return [
            (row.level, float(row.h), row.dofs, float(row.l2_error), float(row.h1_error),
             float(row.order_l2), float(row.order_h1), row.iters,
             0.0 if deterministic else float(row.seconds))
            for row in self.rows
        ]

    def write_csv(self, path, deterministic: bool = True) -> Path:
        return export_csv(path, CSV_HEADER, self.csv_rows(deterministic))

    def render(self) -> str:
        headers = ["level", "h", "dofs", "L2 error", "order", "H1 error", "order", "|u_I-u_h|_1", "iters", "status"]
        body = [
            [row.level, f"{row.h:.4g}", row.dofs, f"{row.l2_error:.3e}", f"{row.order_l2:.2f}",
             f"{row.h1_error:.3e}", f"{row.order_h1:.2f}", f"{row.h1_interpolant:.3e}", row.iters,
             row.status if row.ok else f"{row.status}: {row.error}"]
            for row in self.rows
        ]
        return tabulate(body, headers=headers, tablefmt="github")


def _run_level(problem: AnyProblem, config: StudyConfig, level: int, settings: Settings, dump_dir: Path) -> ConvergenceRow:
    start = time.perf_counter()
    mesh = mesh_for_level(problem, level)
    row = ConvergenceRow(level=level, h=mesh.mesh_size_h)
    try:
        system = assemble(mesh, problem, config, dump_dir=dump_dir / f"level_{level}")
        u, report = solve(system, config, settings)
    except StfemError as e:
        logger.error(f"[STUDY] level {level} failed: {e}")
        row.status, row.error = "failed", str(e)
        row.seconds = time.perf_counter() - start
        return row

    r = system.dofmap.order
    row.dofs = system.n_dofs
    row.iters = report.iterations
    row.residual = report.residual
    if not report.converged:
        row.status, row.error = "not_converged", f"residual {report.residual:.3e} after {report.iterations} iterations"
        logger.error(f"[STUDY] level {level}: solver did not converge ({row.error})")
    if problem.exact is not None:
        norms = error_norms(u, problem.exact, problem.exact_gradient, mesh, r)
        row.l2_error, row.h1_error = norms.l2, norms.h1_semi
        row.h1_interpolant = h1_seminorm(lagrange_interpolate(problem.exact, mesh, r) - u, mesh, r)
    row.seconds = time.perf_counter() - start
    logger.info(f"[STUDY] level {level}: h={row.h:.4g} dofs={row.dofs} L2={row.l2_error:.3e} "
                f"H1={row.h1_error:.3e} iters={row.iters} ({row.seconds:.2f}s)")
    return row


def run_convergence_study(config: StudyConfig, settings: Optional[Settings] = None, write: bool = True) -> ConvergenceTable:
    """
    One row per level in [levels.start, levels.stop]; failures are recorded
    in the row (status, error) and the study continues with the next level.

    Raises:
        ConfigError: levels beyond the desk-scale cap without ``levels.large``,
            or an inconsistent scheme/preset combination.
    """
    settings = settings or get_settings()
    problem = build_problem(config)
    cap = level_cap(problem.dim, settings)
    if config.levels.stop > cap and not config.levels.large:
        raise ConfigError(f"level {config.levels.stop} exceeds the cap {cap} for dimension {problem.dim}; "
                          f"pass --large to run it")
    check_scheme(config, problem)

    out_dir = Path(config.output.directory)
    table = ConvergenceTable(scheme=f"{config.scheme.name}-P{config.scheme.order}", preset=problem.name)
    logger.info(f"[STUDY] {table.preset} with {table.scheme}, levels {config.levels.start}..{config.levels.stop}")
    for level in range(config.levels.start, config.levels.stop + 1):
        table.rows.append(_run_level(problem, config, level, settings, out_dir / "elements"))
    table.compute_orders()

    if write and config.output.csv:
        table.write_csv(out_dir / config.output.csv, deterministic=config.output.deterministic)
    if table.failed:
        logger.warning(f"[STUDY] {sum(not r.ok for r in table.rows)} level(s) failed")
    return table
