# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def block_energies(z, block_dims):
    """Sum of squares of ``z`` over every block of the grid given by ``block_dims``."""
    arr = np.asarray(z, dtype=np.float64)
    cdef Py_ssize_t n = arr.ndim
    shape = arr.shape
    grid = tuple(shape[t] // block_dims[t] for t in range(n))
    out = np.zeros(grid, dtype=np.float64, order="F")
    if arr.size == 0:
        return out

    cdef double[::1] flat = np.ravel(arr, order="F")
    cdef double[::1] acc = np.ravel(out, order="F")
    cdef Py_ssize_t[::1] dims = np.asarray(shape, dtype=np.intp)
    cdef Py_ssize_t[::1] bd = np.asarray(block_dims, dtype=np.intp)
    cdef Py_ssize_t[::1] gstride = np.ones(n, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t t, c, j, r, p = 0, boff
    cdef Py_ssize_t d0 = dims[0], b0 = bd[0], g0 = dims[0] // bd[0]
    cdef Py_ssize_t ncols = flat.shape[0] // d0
    cdef double v, s

    for t in range(1, n):
        gstride[t] = gstride[t - 1] * (dims[t - 1] // bd[t - 1])

    # walk contiguous mode-1 fibers; the block offset of the other modes is fixed per fiber
    for c in range(ncols):
        boff = 0
        for t in range(1, n):
            boff += (idx[t] // bd[t]) * gstride[t]
        for j in range(g0):
            s = 0.0
            for r in range(b0):
                v = flat[p]
                s += v * v
                p += 1
            acc[boff + j] += s
        for t in range(1, n):
            idx[t] += 1
            if idx[t] < dims[t]:
                break
            idx[t] = 0
    return np.asarray(acc).reshape(grid, order="F")


def max_abs_inner(d, Py_ssize_t block_len, bint within):
    """Largest |<d_i, d_j>| over column pairs i < j.

    ``within`` restricts pairs to columns sharing a block of ``block_len``
    consecutive columns; otherwise every pair counts.
    """
    cdef double[::1, :] a = np.asfortranarray(d, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], ncol = a.shape[1]
    cdef Py_ssize_t i, j, r, stop
    cdef double dot, best = 0.0
    for i in range(ncol):
        if within:
            stop = (i // block_len + 1) * block_len
            if stop > ncol:
                stop = ncol
        else:
            stop = ncol
        for j in range(i + 1, stop):
            dot = 0.0
            for r in range(m):
                dot += a[r, i] * a[r, j]
            dot = fabs(dot)
            if dot > best:
                best = dot
    return best
