"""
Element geometry, quadrature, Lagrange elements and norms shared by all schemes.
"""

from app.fem.geometry import (
    EdgeInfo,
    ElementGeometry,
    GeometryBatch,
    batch_geometry,
    compute_element_geometry,
    element_geometry_from_vertices,
    geometry_from_coords,
    local_diffusion_matrices,
    local_diffusion_matrix,
)
from app.fem.lagrange import (
    DofMap,
    boundary_dofs,
    build_dofmap,
    lagrange_interpolate,
    local_dof_count,
    shape_derivatives,
    shape_functions,
    shape_hessians,
)
from app.fem.norms import ErrorNorms, error_norms, facet_l2_norm_sq, h1_seminorm, l2_norm
from app.fem.quadrature import QuadratureRule, monomial_integral, simplex_quadrature

__all__ = [
    "EdgeInfo",
    "ElementGeometry",
    "GeometryBatch",
    "batch_geometry",
    "compute_element_geometry",
    "element_geometry_from_vertices",
    "geometry_from_coords",
    "local_diffusion_matrices",
    "local_diffusion_matrix",
    "DofMap",
    "boundary_dofs",
    "build_dofmap",
    "lagrange_interpolate",
    "local_dof_count",
    "shape_derivatives",
    "shape_functions",
    "shape_hessians",
    "ErrorNorms",
    "error_norms",
    "facet_l2_norm_sq",
    "h1_seminorm",
    "l2_norm",
    "QuadratureRule",
    "monomial_integral",
    "simplex_quadrature",
]
