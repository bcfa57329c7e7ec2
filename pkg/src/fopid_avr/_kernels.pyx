# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: discrete LTI propagation and Grünwald-Letnikov sums."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def propagate(const double[:, ::1] phi, const double[::1] gamma, const double[:, ::1] c,
              const double[::1] d, const double[::1] u, const double[::1] x0, double limit):
    """Run x[k+1] = phi x[k] + gamma u[k], y[k] = c x[k] + d u[k].

    Returns ``(y, x_final, diverged_at)`` where ``diverged_at`` is -1 when
    every state stayed below ``limit`` in magnitude.
    """
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t p = c.shape[0]
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t k, i, j, o
    cdef double acc, uk
    y_arr = np.zeros((p, m), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] xn = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t diverged = -1

    for k in range(m):
        uk = u[k]
        for o in range(p):
            acc = d[o] * uk
            for j in range(n):
                acc += c[o, j] * x[j]
            y[o, k] = acc
        if k == m - 1:
            break
        for i in range(n):
            acc = gamma[i] * uk
            for j in range(n):
                acc += phi[i, j] * x[j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]
            # NaN compares false, so test the negation
            if not (fabs(xn[i]) <= limit):
                diverged = k + 1
        if diverged >= 0:
            break
    return y_arr, x_arr, diverged


def gl_convolve(const double[::1] f, const double[::1] w):
    """out[k] = sum_{j<=k} w[j] f[k-j]  (full-memory Grünwald-Letnikov sum)."""
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t k, j
    cdef double wj
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    # axpy order keeps the inner loop contiguous and vectorizable
    for j in range(min(m, w.shape[0])):
        wj = w[j]
        if wj == 0.0:
            continue
        for k in range(j, m):
            out[k] += wj * f[k - j]
    return out_arr
