"""Dense-matrix kernels.

Matrices throughout the package are 2-D float64 numpy arrays; the helpers
here enforce that contract (shape checks, finiteness) on top of numpy's
BLAS/LAPACK-backed kernels.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ShapeError


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising ShapeError otherwise."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise ShapeError("matmul produced non-finite entries")
    return out


def svd_top2(m) -> tuple[np.ndarray, np.ndarray]:
    """Project rows of ``m`` onto the top-2 right singular directions.

    Returns ``(projection, singular_values)`` where projection is n x 2 and
    the two singular values are non-negative and descending. A second
    singular value of 0 (rank-1 input) is fine; an all-zero matrix is not.
    """
    m = as_matrix(m)
    if m.shape[1] < 2:
        raise ShapeError(f"need at least 2 columns, got {m.shape[1]}")
    if not np.any(m):
        raise DegenerateInputError("rank-0 input: all entries are zero")
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    proj = m @ vt[:2].T
    return proj, s[:2].copy()
