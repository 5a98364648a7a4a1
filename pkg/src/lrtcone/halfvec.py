"""Half-vectorization of symmetric matrices.

A symmetric J x J matrix is stored as the vector of its upper-triangular
entries (diagonal included), row by row: (s_11, s_12, ..., s_1J, s_22, ...,
s_2J, ..., s_JJ).  All covariance-side parameter spaces in this package use
this coordinate order.
"""

import numpy as np


def half_vec_size(j: int) -> int:
    return j * (j + 1) // 2


def half_vec(mat: np.ndarray) -> np.ndarray:
    """Upper-triangular entries of a symmetric matrix, row-major."""
    mat = np.asarray(mat)
    return mat[np.triu_indices(mat.shape[0])]


def half_vec_inverse(vec: np.ndarray, j: int) -> np.ndarray:
    """Rebuild the symmetric matrix from its half-vectorization."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (half_vec_size(j),):
        raise ValueError(f"expected length {half_vec_size(j)} for J={j}, got {vec.shape}")
    mat = np.zeros((j, j))
    mat[np.triu_indices(j)] = vec
    return mat + np.triu(mat, k=1).T


def half_vec_names(j: int, symbol: str = "sigma") -> tuple[str, ...]:
    rows, cols = np.triu_indices(j)
    return tuple(f"{symbol}[{r + 1},{c + 1}]" for r, c in zip(rows, cols))


def symmetric_basis(j: int) -> np.ndarray:
    """Tensor of derivative matrices d Sigma / d s_ij, shape (k, J, J).

    Entry r of the half-vectorization corresponds to the matrix
    E_ij + E_ji for i != j and E_ii on the diagonal.
    """
    k = half_vec_size(j)
    basis = np.zeros((k, j, j))
    rows, cols = np.triu_indices(j)
    idx = np.arange(k)
    basis[idx, rows, cols] = 1.0
    basis[idx, cols, rows] = 1.0
    return basis
