# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled float64 kernels for sparse bilinear contractions."""
cimport cython
from numpy cimport intp_t


def bilinear_f64(const double[:, ::1] a, const double[:, ::1] b,
                 const intp_t[::1] ia, const intp_t[::1] ib,
                 const intp_t[::1] io, const double[::1] sign,
                 double[:, ::1] out):
    """out[io[t], :] += sign[t] * a[ia[t], :] * b[ib[t], :]"""
    cdef Py_ssize_t t, p
    cdef Py_ssize_t nt = ia.shape[0]
    cdef Py_ssize_t nb = a.shape[1]
    cdef double s
    cdef const double* ra
    cdef const double* rb
    cdef double* ro
    with nogil:
        for t in range(nt):
            s = sign[t]
            ra = &a[ia[t], 0]
            rb = &b[ib[t], 0]
            ro = &out[io[t], 0]
            for p in range(nb):
                ro[p] += s * ra[p] * rb[p]


def gather_rows_nonzero(const double[:, ::1] a):
    """Boolean mask (as uint8) of rows of ``a`` with any nonzero entry."""
    cdef Py_ssize_t i, p
    cdef Py_ssize_t n = a.shape[0], nb = a.shape[1]
    import numpy as np
    mask = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] m = mask
    with nogil:
        for i in range(n):
            for p in range(nb):
                if a[i, p] != 0.0:
                    m[i] = 1
                    break
    return mask.view(bool)
