# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bessel recurrence kernels.

Same signatures and return layout as :mod:`cpmse._kernels_py`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp, sinh, sqrt, ceil
from scipy.special.cython_special cimport i0e, k0e, k1e

cnp.import_array()

cdef double LOG_HALF_PI = log(0.5 * 3.141592653589793)


cdef inline double _log_sinh(double x) nogil:
    if x < 1.0:
        return log(sinh(x))
    return x + log1p(-exp(-2.0 * x)) - log(2.0)


cdef inline int _top_order(int nmax, double x) nogil:
    cdef int t = <int>ceil(x)
    if t < nmax + 1:
        t = nmax + 1
    return t + 40


def sph_log_riccati(int lmax, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef int L = lmax + 1
    out_li = np.empty((n, L))
    out_lk = np.empty((n, L))
    out_ri = np.empty((n, L))
    out_rk = np.empty((n, L))
    cdef double[:, ::1] li = out_li
    cdef double[:, ::1] lk = out_lk
    cdef double[:, ::1] ri = out_ri
    cdef double[:, ::1] rk = out_rk
    cdef Py_ssize_t j
    cdef int l, top
    cdef double xx, r, acc, q, nu, qprev
    with nogil:
        for j in range(n):
            xx = xv[j]
            r = 1.0 + 1.0 / xx
            acc = LOG_HALF_PI - xx
            for l in range(L):
                if l > 0:
                    acc += log(r)
                    r = 1.0 / r + (2 * l + 1) / xx
                lk[j, l] = acc
                rk[j, l] = (l + 1) - xx * r

            top = _top_order(lmax, xx)
            nu = top + 0.5
            q = xx / (nu + sqrt(nu * nu + xx * xx))
            # store q_{l+1} in ri temporarily
            for l in range(top - 1, 0, -1):
                q = 1.0 / ((2 * l + 1) / xx + q)
                if l <= L:
                    ri[j, l - 1] = q
            acc = _log_sinh(xx)
            for l in range(L):
                qprev = ri[j, l]
                li[j, l] = acc
                acc += log(qprev)
                ri[j, l] = (l + 1) + xx * qprev
    return out_li, out_lk, out_ri, out_rk


def cyl_log_bessel(int mmax, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef int M = mmax + 1
    out_lI = np.empty((n, M))
    out_lK = np.empty((n, M))
    out_rI = np.empty((n, M))
    out_rK = np.empty((n, M))
    cdef double[:, ::1] lI = out_lI
    cdef double[:, ::1] lK = out_lK
    cdef double[:, ::1] rI = out_rI
    cdef double[:, ::1] rK = out_rK
    cdef Py_ssize_t j
    cdef int m, top
    cdef double xx, r, acc, q, k0, qprev
    with nogil:
        for j in range(n):
            xx = xv[j]
            k0 = k0e(xx)
            r = k1e(xx) / k0
            acc = log(k0) - xx
            for m in range(M):
                if m > 0:
                    acc += log(r)
                    r = 1.0 / r + 2 * m / xx
                lK[j, m] = acc
                rK[j, m] = m - xx * r

            top = _top_order(mmax, xx)
            q = xx / (top + sqrt(<double>top * top + xx * xx))
            for m in range(top - 1, 0, -1):
                q = 1.0 / (2 * m / xx + q)
                if m <= M:
                    rI[j, m - 1] = q
            acc = log(i0e(xx)) + xx
            for m in range(M):
                qprev = rI[j, m]
                lI[j, m] = acc
                acc += log(qprev)
                rI[j, m] = m + xx * qprev
    return out_lI, out_lK, out_rI, out_rK
