"""Pure-Python/numpy implementations of the hot kernels.

These mirror :mod:`fastreact._kernels` one for one and are used when the
compiled extension is not importable (or ``FASTREACT_PURE=1``).
"""

import math

import numpy as np

NEWTON_MAX_ITER = 200
# exp(-x) is flushed to exact zero past this point
EXP_CUTOFF = 745.0


def tridiag_factor(lower, diag, upper):
    """Forward-elimination coefficients for a constant tridiagonal matrix.

    ``lower[i]`` couples row i to i-1 (``lower[0]`` unused), ``upper[i]``
    couples row i to i+1 (``upper[-1]`` unused).
    """
    n = len(diag)
    lo = [float(x) for x in lower]
    d = [float(x) for x in diag]
    up = [float(x) for x in upper]
    cp = [0.0] * n
    inv = [0.0] * n
    inv[0] = 1.0 / d[0]
    cp[0] = up[0] * inv[0]
    for i in range(1, n):
        denom = d[i] - lo[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("singular tridiagonal system")
        inv[i] = 1.0 / denom
        cp[i] = up[i] * inv[i] if i < n - 1 else 0.0
    return np.array(cp), np.array(inv)


def tridiag_solve(lower, cprime, inv_denom, rhs):
    n = len(rhs)
    lo = lower.tolist()
    cp = cprime.tolist()
    inv = inv_denom.tolist()
    r = rhs.tolist()
    y = [0.0] * n
    y[0] = r[0] * inv[0]
    for i in range(1, n):
        y[i] = (r[i] - lo[i] * y[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        y[i] -= cp[i] * y[i + 1]
    return np.array(y)


def powm(u, m):
    """u**m as exp(m log u) for u > 0 and exactly 0 at u == 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(m * np.log(u[pos]))
    return out


def _phi(x):
    # mean of exp(-s) over s in [0, x], divided by 1: (1 - e^-x)/x
    out = np.ones_like(x)
    nz = x > 1e-300
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def _implicit_power_solve(u_prev, a, m):
    """Root of x + a*x**m = u_prev in [0, u_prev], nodewise.

    Newton from the right end, falling back to bisection whenever an iterate
    leaves the current bracket. Returns (root, n_unconverged).
    """
    x = u_prev.copy()
    lo = np.zeros_like(u_prev)
    hi = u_prev.copy()
    active = (a > 0) & (u_prev > 0)
    unconverged = 0
    for _ in range(NEWTON_MAX_ITER):
        if not active.any():
            break
        xa = x[active]
        aa = a[active]
        up = u_prev[active]
        xm1 = powm(xa, m - 1.0)
        g = xa + aa * xa * xm1 - up
        dg = 1.0 + aa * m * xm1
        hi_a = np.where(g > 0, xa, hi[active])
        lo_a = np.where(g <= 0, xa, lo[active])
        step = g / dg
        xn = xa - step
        outside = ~((xn > lo_a) & (xn < hi_a))
        xn = np.where(outside, 0.5 * (lo_a + hi_a), xn)
        done = (np.abs(xn - xa) <= 1e-15 * up) | (g == 0) | (hi_a - lo_a <= 1e-15 * up)
        x[active] = np.where(g == 0, xa, xn)
        lo[active] = lo_a
        hi[active] = hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        unconverged = int(active.sum())
    return x, unconverged


def reaction_coupled(u, v, k, m, tau, passes=3):
    """One reaction sub-step of du = -k u^m v, dv = -k u v over ``tau``.

    v uses the exact integrating factor with the sub-step mean of u, u the
    guarded implicit update with the sub-step mean of v.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    vbar = v.copy()
    u_new = u
    v_new = v
    bad = 0
    for _ in range(passes):
        u_new, bad = _implicit_power_solve(u, tau * k * vbar, m)
        x = k * tau * 0.5 * (u + u_new)
        v_new = np.where(x < EXP_CUTOFF, v * np.exp(-np.minimum(x, EXP_CUTOFF)), 0.0)
        vbar = v * _phi(x)
    return u_new, v_new, bad


def reaction_reduced(u, A, v0, k, m, tau, passes=3):
    """Reaction sub-step of du = -k v0 u^m exp(-k A) with dA = u.

    Returns the new u; the caller owns the accumulation of A.
    """
    u = np.asarray(u, dtype=float)
    kA = k * np.asarray(A, dtype=float)
    e0 = np.where(kA < EXP_CUTOFF, np.exp(-np.minimum(kA, EXP_CUTOFF)), 0.0)
    ebar = e0
    u_new = u
    bad = 0
    for _ in range(passes):
        u_new, bad = _implicit_power_solve(u, tau * k * v0 * ebar, m)
        ebar = e0 * _phi(k * tau * 0.5 * (u + u_new))
    return u_new, bad


def reaction_rate(u, v0, A, k, m):
    """k v0 u^m exp(-k A), evaluated in log space; underflow gives exact 0."""
    u = np.asarray(u, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    out = np.zeros_like(u)
    if k == 0:
        return out
    live = (u > 0) & (v0 > 0)
    logs = (
        math.log(k)
        + np.log(v0[live])
        + m * np.log(u[live])
        - k * np.asarray(A, dtype=float)[live]
    )
    vals = np.where(logs > -EXP_CUTOFF, np.exp(np.maximum(logs, -EXP_CUTOFF)), 0.0)
    out[live] = vals
    return out
