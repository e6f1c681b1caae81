# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled lattice-convolution kernels (see _core_py for the reference)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def apply_shared(double[::1] taps, double[:, ::1] fpad):
    """out[r, i] = sum_k taps[k] * fpad[r, i + k]."""
    cdef Py_ssize_t nrows = fpad.shape[0]
    cdef Py_ssize_t k = taps.shape[0]
    cdef Py_ssize_t nout = fpad.shape[1] - k + 1
    out_arr = np.empty((nrows, nout), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, i, j
    cdef double acc
    with nogil:
        for r in range(nrows):
            for i in range(nout):
                acc = 0.0
                for j in range(k):
                    acc += taps[j] * fpad[r, i + j]
                out[r, i] = acc
    return out_arr


def apply_banked(double[:, ::1] taps, double[:, ::1] fpad):
    """out[r, i] = sum_k taps[r, k] * fpad[r, i + k]."""
    cdef Py_ssize_t nrows = fpad.shape[0]
    cdef Py_ssize_t k = taps.shape[1]
    cdef Py_ssize_t nout = fpad.shape[1] - k + 1
    out_arr = np.empty((nrows, nout), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, i, j
    cdef double acc
    with nogil:
        for r in range(nrows):
            for i in range(nout):
                acc = 0.0
                for j in range(k):
                    acc += taps[r, j] * fpad[r, i + j]
                out[r, i] = acc
    return out_arr


def apply_bank_outer(double[:, ::1] taps, double[:, ::1] fpad):
    """out[m, r, i] = sum_k taps[r, k] * fpad[m, i + k] (every bank row on every input row)."""
    cdef Py_ssize_t nin = fpad.shape[0]
    cdef Py_ssize_t nbank = taps.shape[0]
    cdef Py_ssize_t k = taps.shape[1]
    cdef Py_ssize_t nout = fpad.shape[1] - k + 1
    out_arr = np.empty((nin, nbank, nout), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t m, r, i, j
    cdef double acc
    with nogil:
        for m in range(nin):
            for r in range(nbank):
                for i in range(nout):
                    acc = 0.0
                    for j in range(k):
                        acc += taps[r, j] * fpad[m, i + j]
                    out[m, r, i] = acc
    return out_arr
