"""
Compressed-sparse-row storage backed by scipy.sparse.
"""

import logging
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from app.core.exceptions import ExportError, InvalidInputError

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix


def finalize(A) -> SparseMatrix:
    """
    Canonical CSR: duplicates summed, column indices sorted, explicit zeros removed.
    """
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    return A


def build_csr(rows, cols, values, shape) -> SparseMatrix:
    """Assemble triplets (duplicates accumulate) into a finalized CSR matrix."""
    rows = np.asarray(rows).ravel()
    cols = np.asarray(cols).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(values)):
        raise InvalidInputError("triplet arrays must have equal length")
    return finalize(sp.coo_matrix((values, (rows, cols)), shape=shape))


def scatter_local(local: np.ndarray, element_dofs: np.ndarray, n_dofs: int) -> SparseMatrix:
    """
    Sum local matrices (E, k, k) into the global matrix; ``local[e, j, i]``
    couples test DOF ``element_dofs[e, j]`` with trial DOF ``element_dofs[e, i]``.
    """
    k = element_dofs.shape[1]
    rows = np.repeat(element_dofs, k, axis=1)
    cols = np.tile(element_dofs, (1, k))
    return build_csr(rows, cols, local.reshape(local.shape[0], -1), (n_dofs, n_dofs))


def scatter_vector(local: np.ndarray, element_dofs: np.ndarray, n_dofs: int) -> np.ndarray:
    out = np.zeros(n_dofs)
    np.add.at(out, element_dofs.ravel(), np.asarray(local).ravel())
    return out


def check_csr(A: SparseMatrix) -> bool:
    """Offsets monotone, column indices sorted and unique per row, no stored zeros."""
    if np.any(np.diff(A.indptr) < 0):
        return False
    for row in range(A.shape[0]):
        cols = A.indices[A.indptr[row]:A.indptr[row + 1]]
        if np.any(np.diff(cols) <= 0):
            return False
    return not np.any(A.data == 0)


def export_matrix_market(path, A, comment: str = "") -> Path:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    path = Path(path)
    if path.suffix != ".mtx":
        path = path.with_name(path.name + ".mtx")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", precision=17)
    except OSError as e:
        raise ExportError(path, str(e)) from e
    logger.info(f"[LINALG] matrix {A.shape} with {sp.csr_matrix(A).nnz} nonzeros written to {path}")
    return path


def import_matrix_market(path) -> SparseMatrix:
    path = Path(path)
    try:
        return finalize(scipy.io.mmread(str(path)))
    except (OSError, ValueError) as e:
        raise ExportError(path, str(e)) from e
