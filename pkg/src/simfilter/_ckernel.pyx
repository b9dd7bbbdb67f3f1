# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled dot-product kernel (see ``_dotkernel.h``)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from "_dotkernel.h" nogil:
    int sf_dot_matrix_f32(const float *A, Py_ssize_t lda, Py_ssize_t p,
                          const float *B, Py_ssize_t ldb, Py_ssize_t q,
                          Py_ssize_t d, double *C, Py_ssize_t ldc, int threads)
    int sf_dot_matrix_f64(const double *A, Py_ssize_t lda, Py_ssize_t p,
                          const double *B, Py_ssize_t ldb, Py_ssize_t q,
                          Py_ssize_t d, double *C, Py_ssize_t ldc, int threads)
    double sf_sqnorm_f32(const float *a, Py_ssize_t d)
    double sf_sqnorm_f64(const double *a, Py_ssize_t d)


def _prepare(a, b):
    dtype = np.float32 if a.dtype == np.float32 and b.dtype == np.float32 else np.float64
    return (np.ascontiguousarray(a, dtype=dtype),
            np.ascontiguousarray(b, dtype=dtype))


def dot_matrix(a, b, int threads=1):
    """Return the float64 matrix ``out[i, j] = sum_k a[i, k] * b[j, k]``."""
    a, b = _prepare(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    cdef Py_ssize_t p = a.shape[0], q = b.shape[0], d = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((p, q), dtype=np.float64)
    cdef cnp.ndarray[cnp.float32_t, ndim=2] a32, b32
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a64, b64
    cdef int rc
    if p == 0 or q == 0:
        return out
    if a.dtype == np.float32:
        a32, b32 = a, b
        with nogil:
            rc = sf_dot_matrix_f32(&a32[0, 0] if d else NULL, d, p,
                                   &b32[0, 0] if d else NULL, d, q,
                                   d, &out[0, 0], q, threads)
    else:
        a64, b64 = a, b
        with nogil:
            rc = sf_dot_matrix_f64(&a64[0, 0] if d else NULL, d, p,
                                   &b64[0, 0] if d else NULL, d, q,
                                   d, &out[0, 0], q, threads)
    if rc != 0:
        raise MemoryError("kernel could not allocate packing buffers")
    return out


def squared_norms(a):
    """Row-wise sum of squares with the same left-fold order as ``dot_matrix``."""
    a = np.ascontiguousarray(a)
    if a.dtype != np.float32:
        a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float32_t, ndim=2] a32
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a64
    if n == 0 or d == 0:
        return out
    if a.dtype == np.float32:
        a32 = a
        with nogil:
            for i in range(n):
                out[i] = sf_sqnorm_f32(&a32[i, 0], d)
    else:
        a64 = a
        with nogil:
            for i in range(n):
                out[i] = sf_sqnorm_f64(&a64[i, 0], d)
    return out
