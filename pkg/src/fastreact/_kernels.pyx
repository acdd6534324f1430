# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same signatures and semantics as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, expm1, fabs

cnp.import_array()

DEF NEWTON_MAX_ITER = 200
DEF EXP_CUTOFF = 745.0


def tridiag_factor(lower, diag, upper):
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], i
    cp_arr = np.zeros(n)
    inv_arr = np.zeros(n)
    cdef double[::1] cp = cp_arr
    cdef double[::1] inv = inv_arr
    cdef double denom
    inv[0] = 1.0 / d[0]
    cp[0] = up[0] * inv[0]
    for i in range(1, n):
        denom = d[i] - lo[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("singular tridiagonal system")
        inv[i] = 1.0 / denom
        cp[i] = up[i] * inv[i] if i < n - 1 else 0.0
    return cp_arr, inv_arr


def tridiag_solve(lower, cprime, inv_denom, rhs):
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] cp = np.ascontiguousarray(cprime, dtype=np.float64)
    cdef double[::1] inv = np.ascontiguousarray(inv_denom, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0], i
    y_arr = np.empty(n)
    cdef double[::1] y = y_arr
    y[0] = r[0] * inv[0]
    for i in range(1, n):
        y[i] = (r[i] - lo[i] * y[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        y[i] -= cp[i] * y[i + 1]
    return y_arr


cdef inline double _powm(double u, double m) nogil:
    if u <= 0.0:
        return 0.0
    return exp(m * log(u))


cdef inline double _phi(double x) nogil:
    if x <= 1e-300:
        return 1.0
    return -expm1(-x) / x


cdef inline double _decay(double x) nogil:
    if x >= EXP_CUTOFF:
        return 0.0
    return exp(-x)


cdef int _implicit_power_solve(double u_prev, double a, double m, double* root) nogil:
    """Root of x + a x^m = u_prev in [0, u_prev]; returns 1 if unconverged."""
    cdef double x = u_prev, lo = 0.0, hi = u_prev
    cdef double xm1, g, dg, xn
    cdef int it
    if a <= 0.0 or u_prev <= 0.0:
        root[0] = u_prev
        return 0
    for it in range(NEWTON_MAX_ITER):
        xm1 = _powm(x, m - 1.0)
        g = x + a * x * xm1 - u_prev
        if g == 0.0:
            root[0] = x
            return 0
        dg = 1.0 + a * m * xm1
        if g > 0.0:
            hi = x
        else:
            lo = x
        xn = x - g / dg
        if not (xn > lo and xn < hi):
            xn = 0.5 * (lo + hi)
        if fabs(xn - x) <= 1e-15 * u_prev or hi - lo <= 1e-15 * u_prev:
            root[0] = xn
            return 0
        x = xn
    root[0] = x
    return 1


def reaction_coupled(u, v, double k, double m, double tau, int passes=3):
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], i
    cdef int p, bad = 0, flag = 0
    cdef double vbar, un = 0.0, x = 0.0, vn = 0.0
    u_out = np.empty(n)
    v_out = np.empty(n)
    cdef double[::1] uo = u_out
    cdef double[::1] vo = v_out
    with nogil:
        for i in range(n):
            vbar = vv[i]
            flag = 0
            for p in range(passes):
                flag = _implicit_power_solve(uu[i], tau * k * vbar, m, &un)
                x = k * tau * 0.5 * (uu[i] + un)
                vn = vv[i] * _decay(x)
                vbar = vv[i] * _phi(x)
            bad += flag
            uo[i] = un
            vo[i] = vn
    return u_out, v_out, bad


def reaction_reduced(u, A, v0, double k, double m, double tau, int passes=3):
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] aa = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(v0, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], i
    cdef int p, bad = 0, flag = 0
    cdef double e0, ebar, un = 0.0
    u_out = np.empty(n)
    cdef double[::1] uo = u_out
    with nogil:
        for i in range(n):
            e0 = _decay(k * aa[i])
            ebar = e0
            flag = 0
            for p in range(passes):
                flag = _implicit_power_solve(uu[i], tau * k * w[i] * ebar, m, &un)
                ebar = e0 * _phi(k * tau * 0.5 * (uu[i] + un))
            bad += flag
            uo[i] = un
    return u_out, bad


def reaction_rate(u, v0, A, double k, double m):
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(v0, dtype=np.float64)
    cdef double[::1] aa = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], i
    cdef double lk, s
    out = np.zeros(n)
    cdef double[::1] o = out
    if k == 0.0:
        return out
    lk = log(k)
    with nogil:
        for i in range(n):
            if uu[i] > 0.0 and w[i] > 0.0:
                s = lk + log(w[i]) + m * log(uu[i]) - k * aa[i]
                o[i] = exp(s) if s > -EXP_CUTOFF else 0.0
    return out


def powm(u, double m):
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _powm(uu[i], m)
    return out
