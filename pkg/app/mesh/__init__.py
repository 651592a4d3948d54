"""
Simplicial space-time meshes: generation, refinement, boundary roles, quality checks.
"""

from app.mesh.models import ALL_ROLES, DIRICHLET_ROLES, BoundaryRole, MeshQualityReport, SimplicialMesh
from app.mesh.builder import (
    build_box_mesh,
    build_interval_mesh,
    classify_boundary,
    extract_boundary_facets,
    facet_incidence_counts,
    scale_time_axis,
    signed_volumes,
    uniform_refine,
)
from app.mesh.quality import delaunay_report, is_conforming, is_delaunay, nonobtuse_report

__all__ = [
    "ALL_ROLES",
    "DIRICHLET_ROLES",
    "BoundaryRole",
    "MeshQualityReport",
    "SimplicialMesh",
    "build_box_mesh",
    "build_interval_mesh",
    "classify_boundary",
    "extract_boundary_facets",
    "facet_incidence_counts",
    "scale_time_axis",
    "signed_volumes",
    "uniform_refine",
    "delaunay_report",
    "is_conforming",
    "is_delaunay",
    "nonobtuse_report",
]
