"""
General-order exponential fitting: Nedelec DOFs, weighted DOF matrices,
flux recovery and assembly (r = 1 for n <= 3, r = 2 for n = 2).
"""

from app.schemes.eafe_high.assembly import (
    HighOrderElement,
    assemble_high_order,
    dump_element_matrices,
    flux_gradient_pairing,
    high_order_element,
    load_element_matrices,
    local_high_order_matrix,
)
from app.schemes.eafe_high.flux_recovery import (
    FluxRecovery,
    adjoint_weights,
    build_Z,
    compute_d,
    edge_exponential_moments,
    exponential_means,
    recover_flux,
    weighted_dof_vector,
)
from app.schemes.eafe_high.nedelec import (
    DofFunctional,
    NedelecSpace,
    build_P,
    build_nedelec_space,
    dof_apply,
    reconstruction_residual,
)

__all__ = [
    "HighOrderElement",
    "assemble_high_order",
    "dump_element_matrices",
    "flux_gradient_pairing",
    "high_order_element",
    "load_element_matrices",
    "local_high_order_matrix",
    "FluxRecovery",
    "adjoint_weights",
    "build_Z",
    "compute_d",
    "edge_exponential_moments",
    "exponential_means",
    "recover_flux",
    "weighted_dof_vector",
    "DofFunctional",
    "NedelecSpace",
    "build_P",
    "build_nedelec_space",
    "dof_apply",
    "reconstruction_residual",
]
