"""Compiled inner loops: odd power laws, monotone damping solves, time stepping."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_NEWTON_MAXIT = 400


@njit(cache=True, inline="always")
def _abspow(a, e):
    # a >= 0; integer exponents avoid pow()
    if e == 0.0:
        return 1.0
    if e == 1.0:
        return a
    if e == 2.0:
        return a * a
    if e == 3.0:
        return a * a * a
    if e == 4.0:
        a2 = a * a
        return a2 * a2
    if a == 0.0:
        return 0.0
    return math.pow(a, e)


@njit(cache=True)
def odd_pow(x, e, c):
    """``c |x|^(e-1) x``."""
    if x == 0.0:
        return 0.0
    return c * _abspow(abs(x), e - 1.0) * x


@njit(cache=True)
def g_eval(s, coeff, near, far):
    a = abs(s)
    if a == 0.0:
        return 0.0
    e = near if a < 1.0 else far
    return coeff * _abspow(a, e - 1.0) * s


@njit(cache=True)
def g_deriv(s, coeff, near, far):
    a = abs(s)
    e = near if a < 1.0 else far
    if a == 0.0:
        if e == 1.0:
            return coeff
        if e > 1.0:
            return 0.0
        return math.inf
    return coeff * e * _abspow(a, e - 1.0)


@njit(cache=True)
def solve_scalar(a, lam, coeff, near, far):
    """Unique ``v`` with ``v + lam g(v) = a``; the root lies between 0 and ``a``."""
    if a == 0.0:
        return 0.0
    if near == 1.0 and far == 1.0:
        return a / (1.0 + lam * coeff)
    lo = min(0.0, a)
    hi = max(0.0, a)
    tol = 1e-13 * (1.0 + abs(a))
    v = a - lam * g_eval(a, coeff, near, far)
    if v <= lo or v >= hi:
        v = 0.5 * (lo + hi)
    for _ in range(_NEWTON_MAXIT):
        r = v + lam * g_eval(v, coeff, near, far) - a
        if abs(r) <= tol:
            return v
        if r > 0.0:
            hi = v
        else:
            lo = v
        d = 1.0 + lam * g_deriv(v, coeff, near, far)
        vn = v - r / d
        if not (lo < vn < hi):
            vn = 0.5 * (lo + hi)
        if vn == v or hi - lo <= 4.5e-16 * max(abs(lo), abs(hi)):
            return vn
        v = vn
    return v


@njit(cache=True)
def solve_pair(a, b, lam, kappa, cu, nu, fu_, cw, nw, fw):
    """Solve the wall-node system

        x + lam g1(x) - lam kappa y = a
        y + lam g2(y) + lam x       = b

    by eliminating ``y = S2(b - lam x)``; the reduced map is strictly
    increasing in ``x``.
    """
    lin = nu == 1.0 and fu_ == 1.0 and nw == 1.0 and fw == 1.0
    if lin:
        d1 = 1.0 + lam * cu
        d2 = 1.0 + lam * cw
        det = d1 * d2 + lam * lam * kappa
        x = (a * d2 + lam * kappa * b) / det
        y = (d1 * b - lam * a) / det
        return x, y
    tol = 1e-13 * (1.0 + abs(a) + lam * kappa * abs(b))
    x = a
    # bracket the root of the increasing reduced residual
    y = solve_scalar(b - lam * x, lam, cw, nw, fw)
    r = x + lam * g_eval(x, cu, nu, fu_) - lam * kappa * y - a
    step = abs(r) + 1e-300
    if r > 0.0:
        hi = x
        lo = x - step
        while True:
            yl = solve_scalar(b - lam * lo, lam, cw, nw, fw)
            if lo + lam * g_eval(lo, cu, nu, fu_) - lam * kappa * yl - a <= 0.0:
                break
            step *= 2.0
            lo = x - step
    else:
        lo = x
        hi = x + step
        while True:
            yh = solve_scalar(b - lam * hi, lam, cw, nw, fw)
            if hi + lam * g_eval(hi, cu, nu, fu_) - lam * kappa * yh - a >= 0.0:
                break
            step *= 2.0
            hi = x + step
    for _ in range(_NEWTON_MAXIT):
        y = solve_scalar(b - lam * x, lam, cw, nw, fw)
        r = x + lam * g_eval(x, cu, nu, fu_) - lam * kappa * y - a
        if abs(r) <= tol:
            break
        if r > 0.0:
            hi = x
        else:
            lo = x
        dy = 1.0 / (1.0 + lam * g_deriv(y, cw, nw, fw))
        d = 1.0 + lam * g_deriv(x, cu, nu, fu_) + lam * lam * kappa * dy
        xn = x - r / d
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if xn == x or hi - lo <= 4.5e-16 * max(abs(lo), abs(hi)):
            break
        x = xn
    y = solve_scalar(b - lam * x, lam, cw, nw, fw)
    return x, y


@njit(cache=True)
def csr_matvec(ptr, idx, val, x, out):
    n = ptr.size - 1
    for i in range(n):
        s = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            s += val[k] * x[idx[k]]
        out[i] = s


@njit(cache=True)
def advance(
    nsteps, dt,
    u, v, w, z,
    lapu, fu, bw, hw,
    lptr, lidx, lval, bptr, bidx, bval,
    gam, is_gam, kappa, wu, ww,
    p, sf, q, sh,
    cu, nu_, fu_, cw, nw, fw,
    acc,
):
    """Advance ``nsteps`` velocity-Verlet steps in place.

    ``lapu, fu, bw, hw`` hold ``lap u``, ``f(u)``, ``bih w``, ``h(w)`` at
    the current time on entry and are refreshed on exit.  ``acc[0]``
    accumulates the trapezoid dissipation integral.
    """
    hdt = 0.5 * dt
    n_u = u.size
    n_w = w.size
    vh = np.empty(n_u)
    zh = np.empty(n_w)
    for _ in range(nsteps):
        p0 = 0.0
        for i in range(n_u):
            gv = g_eval(v[i], cu, nu_, fu_)
            p0 += wu[i] * gv * v[i]
            vh[i] = v[i] + hdt * (lapu[i] + fu[i] - gv)
        for k in range(n_w):
            gz = g_eval(z[k], cw, nw, fw)
            p0 += ww[k] * gz * z[k]
            j = gam[k]
            vh[j] += hdt * kappa * z[k]
            zh[k] = z[k] + hdt * (-bw[k] + hw[k] - gz - v[j])
        for i in range(n_u):
            u[i] += dt * vh[i]
        for k in range(n_w):
            w[k] += dt * zh[k]
        csr_matvec(lptr, lidx, lval, u, lapu)
        csr_matvec(bptr, bidx, bval, w, bw)
        for i in range(n_u):
            fu[i] = odd_pow(u[i], p, sf)
        for k in range(n_w):
            hw[k] = odd_pow(w[k], q, sh)
        p1 = 0.0
        for i in range(n_u):
            if is_gam[i]:
                continue
            vi = solve_scalar(vh[i] + hdt * (lapu[i] + fu[i]), hdt, cu, nu_, fu_)
            v[i] = vi
            p1 += wu[i] * g_eval(vi, cu, nu_, fu_) * vi
        for k in range(n_w):
            j = gam[k]
            a = vh[j] + hdt * (lapu[j] + fu[j])
            b = zh[k] + hdt * (-bw[k] + hw[k])
            x, y = solve_pair(a, b, hdt, kappa, cu, nu_, fu_, cw, nw, fw)
            v[j] = x
            z[k] = y
            p1 += wu[j] * g_eval(x, cu, nu_, fu_) * x + ww[k] * g_eval(y, cw, nw, fw) * y
        acc[0] += hdt * (p0 + p1)
