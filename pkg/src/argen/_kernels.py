"""Compiled inner loops for the multiplicative-updates QP solver.

Everything here works on plain float64 arrays; validation and
bookkeeping live in :mod:`argen.qp`.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def root_factor(a, c, B):
    """Positive root of ``a*x**2 + B*x - c = 0`` (``a, c >= 0``).

    The rationalized form is used when ``B > 0`` so that a vanishing
    ``c`` does not cancel to an exact zero.  With ``a == 0`` the linear
    root is returned, or ``inf`` when no finite positive root exists.
    ``a == c == B == 0`` is indeterminate and maps to 1 (no change).
    """
    disc = np.sqrt(B * B + 4.0 * a * c)
    if B > 0.0:
        return 2.0 * c / (B + disc)
    if a > 0.0:
        return (-B + disc) / (2.0 * a)
    if B == 0.0 and c == 0.0:
        return 1.0
    return np.inf


@njit(cache=True, nogil=True)
def mu_step(Ap, Am, b, d, v0, l, v, out, r1_out, r2_out):
    """One sweep of the update, written into ``out``.

    Returns ``(F(v), change)`` where ``F(v)`` is the objective at the
    *incoming* point (free, since ``A v = A+ v - A- v`` is needed anyway)
    and ``change`` is the sup-norm of ``out - v``.
    """
    p = v.shape[0]
    a_vec = Ap @ v
    c_vec = Am @ v
    fval = 0.0
    change = 0.0
    for i in range(p):
        a = a_vec[i]
        c = c_vec[i]
        vi = v[i]
        fval += 0.5 * vi * (a - c) + b[i] * vi + d[i] * abs(vi - v0[i])
        if vi == 0.0:
            r1 = 0.0
            r2 = 0.0
        else:
            r1 = vi * root_factor(a, c, b[i] + d[i])
            r2 = vi * root_factor(a, c, b[i] - d[i])
        r1_out[i] = r1
        r2_out[i] = r2
        if r1 > v0[i]:
            x = min(r1, l[i])
        elif r2 < v0[i]:
            x = min(r2, l[i])
        else:
            x = min(v0[i], l[i])
        out[i] = x
        dx = abs(x - vi)
        if dx > change:
            change = dx
    return fval, change


@njit(cache=True, nogil=True)
def objective_terms(A, b, d, v0, v):
    Av = A @ v
    return 0.5 * v * Av + b * v + d * np.abs(v - v0)


@njit(cache=True, nogil=True)
def kkt_vector(A, b, d, v0, l, v, active_tol):
    """Per-coordinate distance of the subdifferential from zero.

    A coordinate within ``active_tol`` of a bound (0 or l) or of the
    kink ``v0`` may use that point's optimality condition; the smallest
    violation among the admissible conditions is reported.
    """
    p = v.shape[0]
    g = A @ v + b
    res = np.empty(p)
    for i in range(p):
        gi = g[i]
        di = d[i]
        dv = v[i] - v0[i]
        if dv > 0.0:
            best = abs(gi + di)
        elif dv < 0.0:
            best = abs(gi - di)
        else:
            best = max(0.0, abs(gi) - di)
        if abs(dv) <= active_tol:
            best = min(best, max(0.0, abs(gi) - di))
        if v[i] <= active_tol:
            # right derivative of d|v - v0| at v = 0
            slope = -di if v0[i] > 0.0 else di
            best = min(best, max(0.0, -(gi + slope)))
        if np.isfinite(l[i]) and v[i] >= l[i] - active_tol:
            slope = di if v0[i] < l[i] else -di
            best = min(best, max(0.0, gi + slope))
        res[i] = best
    return res


@njit(cache=True, nogil=True)
def mu_loop(A, Ap, Am, b, d, v0, l, v, tol, kkt_tol, active_rel,
            max_iter, floor, trace):
    """Iterate :func:`mu_step` in place on ``v``.

    Stops once the relative sup-norm change is at most ``tol`` *and* the
    KKT residual is at most ``kkt_tol``.  ``trace`` (length
    ``max_iter + 1`` or 0) receives the objective of every iterate.
    Returns ``(iterations, converged)``.
    """
    p = v.shape[0]
    out = np.empty(p)
    r1 = np.empty(p)
    r2 = np.empty(p)
    record = trace.shape[0] > 0
    for it in range(max_iter):
        fval, change = mu_step(Ap, Am, b, d, v0, l, v, out, r1, r2)
        if record:
            trace[it] = fval
        vmax = 0.0
        for i in range(p):
            x = out[i]
            if x > 0.0 and x < floor:
                x = floor if floor <= l[i] else l[i]
            v[i] = x
            if x > vmax:
                vmax = x
        if change <= tol * max(vmax, 1e-300):
            act = active_rel * max(1.0, vmax)
            if kkt_vector(A, b, d, v0, l, v, act).max() <= kkt_tol:
                if record:
                    trace[it + 1] = objective_terms(A, b, d, v0, v).sum()
                return it + 1, True
    if record:
        trace[max_iter] = objective_terms(A, b, d, v0, v).sum()
    return max_iter, False
