# -*- coding: utf-8 -*-
"""
stfem - simplicial space-time finite elements for convection-diffusion.

Verbs:
  mesh          build the box mesh of a preset at one level and report it
  solve         one solve with VTK output and a plane slice
  converge      convergence study over a range of levels (CSV + table)
  rescale-demo  compare a solve with its time-rescaled counterpart

Exit codes: 0 success, 2 solver or computation failure, 3 configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from tabulate import tabulate

from app.core.config import StudyConfig, apply_overrides, get_settings, load_study_config
from app.core.exceptions import ConfigError, StfemError
from app.mesh.quality import delaunay_report
from app.services.single import run_rescale_demo, run_single
from app.services.study import build_problem, mesh_for_level, run_convergence_study
from app.utils.exporters import export_vtk
from app.utils.logger import setup_logging

EXIT_OK = 0
EXIT_FAILURE = 2
EXIT_CONFIG = 3

logger = logging.getLogger("stfem")


def report_crash(exc_type, exc_value, exc_traceback):
    """Send errors that escape `main` to the log file; Ctrl-C keeps the default hook."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    logger.critical(f"[CLI] uncaught {exc_type.__name__}: {exc_value}", exc_info=(exc_type, exc_value, exc_traceback))
    print(f"internal error: {exc_type.__name__}: {exc_value} (traceback in the log)", file=sys.stderr)


def parse_levels(text: Optional[str]) -> Tuple[Optional[int], Optional[int]]:
    """'3' -> (3, 3); '1-4' or '1:4' -> (1, 4)."""
    if text is None:
        return None, None
    for sep in ("-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            break
    else:
        lo = hi = text
    try:
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"invalid --levels {text!r}; expected N or A-B") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="study configuration (.toml or .json)")
    common.add_argument("--preset", help="problem preset name")
    common.add_argument("--scheme", choices=["sd", "eafe", "eafe_high"])
    common.add_argument("--order", type=int, choices=[1, 2])
    common.add_argument("--eps", type=float, help="time-direction diffusion of the fitted schemes")
    common.add_argument("--theta", type=float, help="streamline diffusion parameter")
    common.add_argument("--beta", type=float, help="convection parameter of the boundary-layer-1d preset")
    common.add_argument("--levels", help="level N or range A-B (h = 2^-level)")
    common.add_argument("--kappa", type=float, help="time rescaling factor")
    common.add_argument("--out", help="output directory")
    common.add_argument("--csv", help="convergence CSV file name inside the output directory")
    common.add_argument("--vtk", help="VTK file name inside the output directory")
    common.add_argument("--slice-axis", type=int)
    common.add_argument("--slice-value", type=float)
    common.add_argument("--dump-elements", type=int, nargs="*", help="element ids for matrix dumps")
    common.add_argument("--solver", choices=["auto", "dense", "gmres"])
    common.add_argument("--preconditioner", choices=["none", "jacobi", "ilu0", "gauss_seidel"])
    common.add_argument("--tol", type=float)
    common.add_argument("--large", action="store_true", default=None, help="allow levels beyond the desk-scale cap")
    common.add_argument("--timings", action="store_true", help="write measured seconds to the CSV")
    common.add_argument("--seed", type=int, help="seed for sampled checks")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")

    parser = argparse.ArgumentParser(prog="stfem", description="Space-time finite element toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="build and report a mesh")
    sub.add_parser("solve", parents=[common], help="single solve with exports")
    sub.add_parser("converge", parents=[common], help="convergence study")
    sub.add_parser("rescale-demo", parents=[common], help="time rescaling comparison")
    return parser


def resolve_config(args: argparse.Namespace) -> StudyConfig:
    config = load_study_config(args.config) if args.config else StudyConfig()
    start, stop = parse_levels(args.levels)
    overrides: Dict[str, Dict[str, Any]] = {
        "problem": {"preset": args.preset, "eps": args.eps, "beta": args.beta},
        "scheme": {"name": args.scheme, "order": args.order, "theta": args.theta},
        "levels": {"start": start, "stop": stop, "large": args.large},
        "solver": {"method": args.solver, "preconditioner": args.preconditioner, "tol": args.tol},
        "output": {
            "directory": args.out,
            "csv": args.csv,
            "vtk": args.vtk,
            "slice_axis": args.slice_axis,
            "slice_value": args.slice_value,
            "dump_elements": args.dump_elements,
            "deterministic": False if args.timings else None,
        },
    }
    if args.command != "rescale-demo":
        overrides["problem"]["kappa"] = args.kappa
    if args.seed is not None:
        overrides["seed"] = args.seed
    return apply_overrides(config, overrides)


def cmd_mesh(args, config: StudyConfig) -> int:
    problem = build_problem(config)
    mesh = mesh_for_level(problem, config.levels.stop)
    summary = mesh.summary()
    rows: List[Tuple[str, Any]] = [(k, v) for k, v in summary.items() if not isinstance(v, dict)]
    rows.extend((f"facets {role}", count) for role, count in mesh.role_counts().items())
    if mesh.dim == 2:
        rows.append(("delaunay", delaunay_report(mesh).passed))
    print(tabulate(rows, headers=["property", "value"], tablefmt="github"))
    if config.output.vtk:
        export_vtk(mesh, np.zeros(mesh.n_vertices), Path(config.output.directory) / config.output.vtk,
                   title=f"{problem.name} mesh level {config.levels.stop}")
    return EXIT_OK


def cmd_solve(args, config: StudyConfig) -> int:
    result = run_single(config)
    print(json.dumps(result.to_dict(), indent=2, default=str))
    if not result.report.converged or not result.finite:
        logger.error(f"[CLI] solve failed: converged={result.report.converged} finite={result.finite}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_converge(args, config: StudyConfig) -> int:
    table = run_convergence_study(config)
    print(f"{table.preset} / {table.scheme}")
    print(table.render())
    return EXIT_FAILURE if table.failed else EXIT_OK


def cmd_rescale_demo(args, config: StudyConfig) -> int:
    kappa = 2.0 if args.kappa is None else args.kappa
    report = run_rescale_demo(config, kappa)
    print(tabulate(list(report.to_dict().items()), headers=["quantity", "value"], tablefmt="github"))
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "rescale-demo": cmd_rescale_demo,
}


def main(argv: Optional[List[str]] = None) -> int:
    sys.excepthook = report_crash
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = get_settings()
        setup_logging(args.log_level, settings.log_dir)
        config = resolve_config(args)
        logger.info(f"[CLI] {args.command}: preset={config.problem.preset} scheme={config.scheme.name} "
                    f"order={config.scheme.order} levels={config.levels.start}..{config.levels.stop}")
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(f"[CLI] configuration error: {e}")
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StfemError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
