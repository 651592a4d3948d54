"""
Plain-text outputs: convergence CSV, legacy VTK 3.0 ASCII unstructured grids
and CSV slices of nodal fields. Floats are written with 17 significant digits
so identical inputs give byte-identical files.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import ExportError, InvalidInputError
from app.mesh.models import SimplicialMesh

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

VTK_CELL_TYPES = {1: 3, 2: 5, 3: 10}  # line, triangle, tetrahedron
AXIS_NAMES = {1: ("x",), 2: ("x", "t"), 3: ("x", "y", "t")}


def format_float(value) -> str:
    return "%.17g" % float(value)


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(path, f"cannot create directory: {e}") from e
    return path


def export_csv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    """Write rows under ``header``; floats use %.17g, other values str()."""
    path = _prepare(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as e:
        raise ExportError(path, f"CSV write failed: {e}") from e
    logger.info(f"[EXPORT] CSV written: {path} ({len(rows)} rows)")
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise ExportError(path, f"CSV read failed: {e}") from e


def _nodal_values(mesh: SimplicialMesh, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if u.size < mesh.n_vertices:
        raise InvalidInputError(f"field has {u.size} values for {mesh.n_vertices} vertices")
    # P2 fields carry edge values after the vertex values
    return u[:mesh.n_vertices]


def export_vtk(mesh: SimplicialMesh, u: np.ndarray, path: PathLike, title: str = "space-time solution",
               field_name: str = "u") -> Path:
    """
    Legacy VTK 3.0 ASCII unstructured grid with the vertex values of ``u`` as
    POINT_DATA. Coordinates are padded with zeros to three components.
    """
    values = _nodal_values(mesh, u)
    points = np.zeros((mesh.n_vertices, 3))
    points[:, :mesh.dim] = mesh.vertices
    cell_type = VTK_CELL_TYPES.get(mesh.dim)
    if cell_type is None:
        raise InvalidInputError(f"no VTK cell type for dimension {mesh.dim}")
    k = mesh.dim + 1

    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines.extend(" ".join(format_float(c) for c in p) for p in points)
    lines.append(f"CELLS {mesh.n_simplices} {mesh.n_simplices * (k + 1)}")
    lines.extend(f"{k} " + " ".join(str(int(v)) for v in cell) for cell in mesh.simplices)
    lines.append(f"CELL_TYPES {mesh.n_simplices}")
    lines.extend(str(cell_type) for _ in range(mesh.n_simplices))
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    lines.append(f"SCALARS {field_name} double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(format_float(v) for v in values)

    path = _prepare(path)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as e:
        raise ExportError(path, f"VTK write failed: {e}") from e
    logger.info(f"[EXPORT] VTK written: {path} ({mesh.n_vertices} points, {mesh.n_simplices} cells)")
    return path


def read_vtk(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Parse a file written by export_vtk, checking the section grammar.
    Returns points (N, 3), cells (C, k), cell types (C,) and the point scalars.
    """
    path = Path(path)
    try:
        tokens = path.read_text(encoding="ascii").split("\n")
    except OSError as e:
        raise ExportError(path, f"VTK read failed: {e}") from e
    if not tokens[0].startswith("# vtk DataFile Version") or tokens[2] != "ASCII" \
            or tokens[3] != "DATASET UNSTRUCTURED_GRID":
        raise ExportError(path, "not a legacy ASCII unstructured grid")

    def section(i, keyword):
        parts = tokens[i].split()
        if not parts or parts[0] != keyword:
            raise ExportError(path, f"line {i + 1}: expected {keyword}, got {tokens[i]!r}")
        return parts

    i = 4
    n_points = int(section(i, "POINTS")[1])
    points = np.array([[float(v) for v in tokens[i + 1 + p].split()] for p in range(n_points)])
    i += 1 + n_points
    n_cells, size = (int(v) for v in section(i, "CELLS")[1:3])
    raw = [[int(v) for v in tokens[i + 1 + c].split()] for c in range(n_cells)]
    if sum(len(c) for c in raw) != size or any(c[0] != len(c) - 1 for c in raw):
        raise ExportError(path, "CELLS section size mismatch")
    cells = np.array([c[1:] for c in raw])
    i += 1 + n_cells
    section(i, "CELL_TYPES")
    types = np.array([int(tokens[i + 1 + c]) for c in range(n_cells)])
    i += 1 + n_cells
    if int(section(i, "POINT_DATA")[1]) != n_points:
        raise ExportError(path, "POINT_DATA count differs from POINTS")
    section(i + 1, "SCALARS")
    section(i + 2, "LOOKUP_TABLE")
    values = np.array([float(tokens[i + 3 + p]) for p in range(n_points)])
    return points, cells, types, values


@dataclass(frozen=True)
class SliceData:
    """Nodal values on the plane y[axis] = value."""
    axis: int
    value: float
    columns: Tuple[str, ...]
    coords: np.ndarray  # (m, n-1), remaining coordinates
    values: np.ndarray  # (m,)

    @property
    def n_points(self) -> int:
        return int(self.values.shape[0])


def extract_slice(mesh: SimplicialMesh, u: np.ndarray, axis: int, value: float, tol: float = 1e-12) -> SliceData:
    """Vertices within ``tol`` of the plane, sorted lexicographically by the remaining coordinates."""
    if not 0 <= axis < mesh.dim:
        raise InvalidInputError(f"slice axis {axis} outside 0..{mesh.dim - 1}")
    values = _nodal_values(mesh, u)
    on_plane = np.flatnonzero(np.abs(mesh.vertices[:, axis] - value) <= tol)
    keep = [d for d in range(mesh.dim) if d != axis]
    coords = mesh.vertices[on_plane][:, keep]
    order = np.lexsort(coords.T[::-1]) if len(keep) else np.arange(len(on_plane))
    names = AXIS_NAMES.get(mesh.dim, tuple(f"y{d}" for d in range(mesh.dim)))
    if not len(on_plane):
        logger.warning(f"[EXPORT] no vertex on the plane {names[axis]} = {value}")
    return SliceData(
        axis=axis,
        value=float(value),
        columns=tuple(names[d] for d in keep) + ("u",),
        coords=coords[order],
        values=values[on_plane][order],
    )


def export_slice_csv(data: SliceData, path: PathLike) -> Path:
    rows = [tuple(float(c) for c in coords) + (float(v),) for coords, v in zip(data.coords, data.values)]
    return export_csv(path, data.columns, rows)


def default_slice_value(mesh: SimplicialMesh, axis: int, value: Optional[float] = None) -> float:
    """Midpoint of the axis extent unless ``value`` is given."""
    if value is not None:
        return float(value)
    lo, hi = mesh.extents[axis]
    return 0.5 * (lo + hi)
