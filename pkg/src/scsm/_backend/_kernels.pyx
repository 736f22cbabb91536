# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the sequential estimator kernels.

Same contracts as ``scsm._backend._pykernels``; see that module for the
documented semantics.  The hot loops here are plain C loops over typed
memoryviews, which removes the per-step slice/temporary overhead of the
NumPy fallback on long event grids.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite

cnp.import_array()


def recursive_fit(const double[::1] x, const double[::1] gc,
                  const double[:, ::1] jac, const long[::1] risk_start,
                  const long[::1] ev_pos, const long[::1] ev_off,
                  double den_threshold):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = risk_start.shape[0]
    cdef Py_ssize_t p = jac.shape[1]

    num_a = np.zeros(m)
    den_a = np.zeros(m)
    delta_a = np.zeros(m)
    dnum_a = np.zeros(m)
    dden_a = np.zeros(m)
    slope_a = np.zeros(m)
    tg_a = np.zeros((m, p))
    bh_a = np.zeros(m)
    grad_a = np.zeros(p)
    dden_th_a = np.zeros(p)
    dnum_th_a = np.zeros(p)

    cdef double[::1] num = num_a, den = den_a, delta = delta_a
    cdef double[::1] dnum = dnum_a, dden = dden_a, slope = slope_a
    cdef double[:, ::1] tg = tg_a
    cdef double[::1] bh = bh_a, grad = grad_a
    cdef double[::1] dden_th = dden_th_a, dnum_th = dnum_th_a

    cdef double b = 0.0
    cdef double den_k, dden_k, num_k, dnum_k, delta_k, slope_k, w, e, xi, f
    cdef Py_ssize_t k, i, j, q, r

    for k in range(m):
        r = risk_start[k]
        den_k = 0.0
        dden_k = 0.0
        for q in range(p):
            dden_th[q] = 0.0
            dnum_th[q] = 0.0
        for i in range(r, n):
            xi = x[i]
            e = exp(b * xi)
            w = gc[i] * e
            den_k += w * xi
            dden_k += w * xi * xi
            for q in range(p):
                dden_th[q] -= jac[i, q] * e * xi
        if not isfinite(den_k) or fabs(den_k) < den_threshold:
            return (k, num_a, den_a, delta_a, dnum_a, dden_a, slope_a, tg_a, bh_a)

        num_k = 0.0
        dnum_k = 0.0
        for j in range(ev_off[k], ev_off[k + 1]):
            i = ev_pos[j]
            xi = x[i]
            e = exp(b * xi)
            w = gc[i] * e
            num_k += w
            dnum_k += w * xi
            for q in range(p):
                dnum_th[q] -= jac[i, q] * e

        delta_k = num_k / den_k
        slope_k = dnum_k / den_k - delta_k * (dden_k / den_k)
        f = 1.0 + slope_k
        for q in range(p):
            grad[q] = f * grad[q] + dnum_th[q] / den_k - delta_k * (dden_th[q] / den_k)
        b = b + delta_k
        if not isfinite(b):
            return (k, num_a, den_a, delta_a, dnum_a, dden_a, slope_a, tg_a, bh_a)

        num[k] = num_k
        den[k] = den_k
        delta[k] = delta_k
        dnum[k] = dnum_k
        dden[k] = dden_k
        slope[k] = slope_k
        for q in range(p):
            tg[k, q] = grad[q]
        bh[k] = b

    return (-1, num_a, den_a, delta_a, dnum_a, dden_a, slope_a, tg_a, bh_a)


def influence_base(const double[::1] x, const double[::1] gc,
                   const long[::1] risk_start, const long[::1] ev_pos,
                   const long[::1] ev_off, const double[::1] den,
                   const double[::1] delta, const double[::1] slope,
                   const double[::1] b_hat):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = risk_start.shape[0]

    out_a = np.empty((m, n))
    run_a = np.zeros(n)
    cdef double[:, ::1] out = out_a
    cdef double[::1] run = run_a

    cdef double b = 0.0
    cdef double f, coef
    cdef Py_ssize_t k, i, j, r

    for k in range(m):
        f = 1.0 + slope[k]
        for i in range(n):
            run[i] *= f
        r = risk_start[k]
        coef = n / den[k]
        for i in range(r, n):
            run[i] += coef * gc[i] * exp(b * x[i]) * (-x[i] * delta[k])
        for j in range(ev_off[k], ev_off[k + 1]):
            i = ev_pos[j]
            run[i] += coef * gc[i] * exp(b * x[i])
        for i in range(n):
            out[k, i] = run[i]
        b = b_hat[k]
    return out_a
