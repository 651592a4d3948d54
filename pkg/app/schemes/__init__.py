"""
Discretization schemes: exponential fitting (lowest and general order) and
streamline diffusion, all returning an AssembledSystem.
"""

from app.schemes.common import AssembledSystem
from app.schemes.eafe_high import assemble_high_order
from app.schemes.eafe_low import EafeCoefficients, assemble_eafe, bernoulli, m_matrix_check
from app.schemes.sd import SdParameters, assemble_sd, energy_norm

__all__ = [
    "AssembledSystem",
    "assemble_high_order",
    "EafeCoefficients",
    "assemble_eafe",
    "bernoulli",
    "m_matrix_check",
    "SdParameters",
    "assemble_sd",
    "energy_norm",
]
