"""Pure numpy fallback for the compiled dot-product kernel.

Reproduces the compiled kernel bit for bit: each output element is a left
fold over the vector index, ``s = (((0 + a0*b0) + a1*b1) + ...)``, with every
product and sum rounded to float64. The fold runs over the vector index as
the outer loop and over a tile of output elements as the vectorised inner
step, so it is slow compared to BLAS but independent of BLAS summation order.
"""

from __future__ import annotations

import numpy as np

ROW_BLOCK = 64
COL_BLOCK = 1024


def _as_float(a: np.ndarray) -> np.ndarray:
    if a.dtype == np.float32:
        return a
    return np.asarray(a, dtype=np.float64)


def dot_matrix(a: np.ndarray, b: np.ndarray, threads: int = 1) -> np.ndarray:
    """Return the float64 matrix ``out[i, j] = sum_k a[i, k] * b[j, k]``.

    ``threads`` is accepted for signature parity and ignored.
    """
    a = _as_float(a)
    b = _as_float(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    p, d = a.shape
    q = b.shape[0]
    out = np.zeros((p, q), dtype=np.float64)
    for i0 in range(0, p, ROW_BLOCK):
        at = np.ascontiguousarray(a[i0:i0 + ROW_BLOCK].T, dtype=np.float64)
        for j0 in range(0, q, COL_BLOCK):
            bt = np.ascontiguousarray(b[j0:j0 + COL_BLOCK].T, dtype=np.float64)
            acc = out[i0:i0 + at.shape[1], j0:j0 + bt.shape[1]]
            tmp = np.empty_like(acc)
            for k in range(d):
                np.multiply(at[k][:, None], bt[k][None, :], out=tmp)
                np.add(acc, tmp, out=acc)
    return out


def squared_norms(a: np.ndarray) -> np.ndarray:
    """Row-wise sum of squares with the same left-fold order as ``dot_matrix``."""
    a = _as_float(a)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    n, d = a.shape
    out = np.zeros(n, dtype=np.float64)
    for i0 in range(0, n, COL_BLOCK):
        at = np.ascontiguousarray(a[i0:i0 + COL_BLOCK].T, dtype=np.float64)
        acc = out[i0:i0 + at.shape[1]]
        for k in range(d):
            np.add(acc, at[k] * at[k], out=acc)
    return out
