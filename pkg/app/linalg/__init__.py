"""
Sparse storage and linear solvers for the assembled systems.
"""

from app.linalg.sparse import (
    SparseMatrix,
    build_csr,
    check_csr,
    export_matrix_market,
    finalize,
    import_matrix_market,
    scatter_local,
    scatter_vector,
)
from app.linalg.solvers import (
    DENSE_LIMIT,
    Preconditioner,
    SolverReport,
    build_preconditioner,
    relative_residual,
    solve_dense_lu,
    solve_gmres,
    solve_linear_system,
)

__all__ = [
    "SparseMatrix",
    "build_csr",
    "check_csr",
    "export_matrix_market",
    "finalize",
    "import_matrix_market",
    "scatter_local",
    "scatter_vector",
    "DENSE_LIMIT",
    "Preconditioner",
    "SolverReport",
    "build_preconditioner",
    "relative_residual",
    "solve_dense_lu",
    "solve_gmres",
    "solve_linear_system",
]
