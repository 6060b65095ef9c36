"""Compiled scalar kernels shared by the GLD evaluation and fitting code.

``kind`` is 0 for RS and 1 for FKML throughout.
"""

import math

import numpy as np
from numba import njit

RS = 0
FKML = 1

# FKML shape below this magnitude uses the logarithmic limit
SMALL_LAMBDA = 1e-8
RS_GRID_SIZE = 4097
RS_GRID_EDGE = 1e-9


@njit(cache=True)
def _pow_at_zero(lam):
    # limit of t**lam as t -> 0+
    if lam > 0.0:
        return 0.0
    if lam == 0.0:
        return 1.0
    return np.inf


@njit(cache=True)
def _fkml_term(t, lam):
    # (t**lam - 1) / lam with the lam -> 0 limit log(t)
    if t == 0.0:
        if lam > 0.0:
            return -1.0 / lam
        return -np.inf
    lt = math.log(t)
    if abs(lam) < SMALL_LAMBDA:
        return lt
    return math.expm1(lam * lt) / lam


@njit(cache=True)
def quantile_scalar(u, l1, l2, l3, l4, kind):
    if kind == RS:
        if u == 0.0:
            a = _pow_at_zero(l3)
        else:
            a = u ** l3
        if u == 1.0:
            b = _pow_at_zero(l4)
        else:
            b = (1.0 - u) ** l4
        return l1 + (a - b) / l2
    return l1 + (_fkml_term(u, l3) - _fkml_term(1.0 - u, l4)) / l2


@njit(cache=True)
def _deriv_term(t, lam, coef):
    # coef * t**(lam - 1), with the t -> 0 limit
    if coef == 0.0:
        return 0.0
    if t == 0.0:
        if lam > 1.0:
            return 0.0
        if lam == 1.0:
            return coef
        return coef * np.inf
    return coef * t ** (lam - 1.0)


@njit(cache=True)
def dquantile_scalar(u, l1, l2, l3, l4, kind):
    if kind == RS:
        return (_deriv_term(u, l3, l3) + _deriv_term(1.0 - u, l4, l4)) / l2
    return (_deriv_term(u, l3, 1.0) + _deriv_term(1.0 - u, l4, 1.0)) / l2


@njit(cache=True)
def invert_scalar(x, l1, l2, l3, l4, kind, u0):
    """Solve Q(u) = x on [0, 1]; bisection guarded Newton steps."""
    lower = quantile_scalar(0.0, l1, l2, l3, l4, kind)
    upper = quantile_scalar(1.0, l1, l2, l3, l4, kind)
    return invert_bounded(x, l1, l2, l3, l4, kind, u0, lower, upper)


@njit(cache=True)
def invert_bounded(x, l1, l2, l3, l4, kind, u0, lower, upper):
    lo = 0.0
    hi = 1.0
    if x <= lower:
        return 0.0
    if x >= upper:
        return 1.0
    u = u0
    if not (u > 0.0 and u < 1.0):
        u = 0.5
    for _ in range(400):
        d = quantile_scalar(u, l1, l2, l3, l4, kind) - x
        if d == 0.0:
            return u
        if d > 0.0:
            hi = u
        else:
            lo = u
        dq = dquantile_scalar(u, l1, l2, l3, l4, kind)
        un = u - d / dq
        if not (un > lo and un < hi):
            un = 0.5 * (lo + hi)
        tol = 1e-13 * min(un, 1.0 - un)
        if tol < 1e-300:
            tol = 1e-300
        if abs(un - u) <= tol or hi - lo <= tol:
            return un
        u = un
    return u


@njit(cache=True)
def invert_array(x, l1, l2, l3, l4, kind, u_warm):
    lower = quantile_scalar(0.0, l1, l2, l3, l4, kind)
    upper = quantile_scalar(1.0, l1, l2, l3, l4, kind)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = invert_bounded(x[i], l1, l2, l3, l4, kind, u_warm[i], lower, upper)
    return out


@njit(cache=True)
def quantile_array(u, l1, l2, l3, l4, kind):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = quantile_scalar(u[i], l1, l2, l3, l4, kind)
    return out


@njit(cache=True)
def dquantile_array(u, l1, l2, l3, l4, kind):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = dquantile_scalar(u[i], l1, l2, l3, l4, kind)
    return out


@njit(cache=True)
def rs_min_derivative(l2, l3, l4):
    """Minimum of Q'(u) over the validity grid, endpoint limits included."""
    m = np.inf
    step = (1.0 - 2.0 * RS_GRID_EDGE) / (RS_GRID_SIZE - 1)
    for i in range(RS_GRID_SIZE):
        u = RS_GRID_EDGE + i * step
        v = dquantile_scalar(u, 0.0, l2, l3, l4, RS)
        if v != v:
            return -np.inf
        if v < m:
            m = v
    for u in (0.0, 1.0):
        v = dquantile_scalar(u, 0.0, l2, l3, l4, RS)
        # inf - inf at an endpoint is decided by the grid
        if v == v and v < m:
            m = v
    return m


@njit(cache=True)
def loglik_with_warm(x, l1, l2, l3, l4, kind, u_warm):
    """Sum of log densities; refreshes ``u_warm`` in place on success."""
    lower = quantile_scalar(0.0, l1, l2, l3, l4, kind)
    upper = quantile_scalar(1.0, l1, l2, l3, l4, kind)
    n = x.shape[0]
    for i in range(n):
        if x[i] < lower or x[i] > upper:
            return -np.inf
    total = 0.0
    u_new = np.empty(n)
    for i in range(n):
        u = invert_bounded(x[i], l1, l2, l3, l4, kind, u_warm[i], lower, upper)
        dq = dquantile_scalar(u, l1, l2, l3, l4, kind)
        if not (dq > 0.0) or dq == np.inf:
            return -np.inf
        total -= math.log(dq)
        u_new[i] = u
    for i in range(n):
        u_warm[i] = u_new[i]
    return total


# Gaussian-kernel functionals for the Sheather-Jones selector. The sums
# run over ordered pairs i < j; pairs beyond DELMAX in (d/h)^2 are dropped
# as negligible.
SJ_DELMAX = 1000.0


@njit(cache=True)
def _phi_term(delta, order):
    # delta is the squared standardized distance
    e = math.exp(-0.5 * delta)
    if order == 4:
        return e * (delta * delta - 6.0 * delta + 3.0)
    return e * (delta * delta * delta - 15.0 * delta * delta + 45.0 * delta - 15.0)


@njit(cache=True)
def phi_pair_sum(x, h, order):
    """Sum over i < j of the phi4 / phi6 term at (x_i - x_j) / h; x sorted."""
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = (x[j] - x[i]) / h
            delta = d * d
            if delta >= SJ_DELMAX:
                break
            total += _phi_term(delta, order)
    return total


@njit(cache=True)
def phi_binned_sum(cnt, width, h, order):
    """Same sum with pair distances binned: cnt[k] pairs at k * width."""
    total = 0.0
    for k in range(cnt.shape[0]):
        d = k * width / h
        delta = d * d
        if delta >= SJ_DELMAX:
            break
        total += _phi_term(delta, order) * cnt[k]
    return total


@njit(cache=True)
def kde_sorted(xs, h, points, cutoff):
    """Gaussian KDE of sorted ``xs`` at ``points``; kernels farther than
    cutoff * h contribute nothing."""
    n = xs.shape[0]
    out = np.empty(points.shape[0])
    norm = 1.0 / (n * h * math.sqrt(2.0 * math.pi))
    for k in range(points.shape[0]):
        y = points[k]
        lo = np.searchsorted(xs, y - cutoff * h)
        hi = np.searchsorted(xs, y + cutoff * h, side="right")
        s = 0.0
        for i in range(lo, hi):
            z = (y - xs[i]) / h
            s += math.exp(-0.5 * z * z)
        out[k] = s * norm
    return out
