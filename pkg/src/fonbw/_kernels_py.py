"""Pure-Python implementations of the hot loops.

Selected when the compiled ``_kernels`` extension is unavailable (or forced via
``FONBW_BACKEND=python``). Signatures and semantics mirror ``_kernels.pyx``.
"""
import math

import numpy as np

from .errors import DivergenceError, InvalidArgument, SolverError

NEWTON_MAX_ITER = 100


def _pow(ax, n):
    # float ** raises on overflow; follow IEEE (and the compiled kernels) instead
    try:
        return ax**n
    except OverflowError:
        return math.inf


def _sgnpow(x, n):
    if x > 0:
        return _pow(x, n)
    if x < 0:
        return -_pow(-x, n)
    return 0.0


def _abspow(x, n):
    return _pow(abs(x), n)


def _bw_rate(ud, h, a, b, c, n):
    return a * ud - b * abs(ud) * _sgnpow(h, n) - c * ud * _abspow(h, n)


def _check(x, guard, step, what):
    if not (abs(x) <= guard):
        raise DivergenceError(f"{what} diverged (|{what}| > {guard:g} or non-finite)", step)


def gl_filter(weights, f, memory):
    w = np.ascontiguousarray(weights, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    m = f.size
    need = m - 1 if memory < 0 else min(m - 1, memory)
    if w.size < need + 1:
        raise InvalidArgument("weight table too short for the requested memory")
    wr = w[: need + 1][::-1].copy()
    out = np.empty(m)
    for k in range(m):
        L = k if memory < 0 else min(k, memory)
        out[k] = np.dot(wr[need - L :], f[k - L : k + 1])
    return out


def history_sum(weights, h, k, memory):
    if k < 0:
        raise InvalidArgument(f"step index must be non-negative, got {k}")
    L = k if memory < 0 else min(k, memory)
    if L == 0:
        return 0.0
    w = np.asarray(weights, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if w.size < L + 1 or h.size < k:
        raise InvalidArgument("history or weight table too short")
    return float(np.dot(w[1 : L + 1], h[k - 1 : k - L - 1 if k - L - 1 >= 0 else None : -1]))


def bw_rk4(udot, dt, a, b, c, n, h0, guard):
    ud = np.asarray(udot, dtype=np.float64)
    m = ud.size
    h = np.empty(m)
    x = float(h0)
    h[0] = x
    for k in range(m - 1):
        u0 = ud[k]
        u1 = ud[k + 1]
        um = 0.5 * (u0 + u1)
        k1 = _bw_rate(u0, x, a, b, c, n)
        k2 = _bw_rate(um, x + 0.5 * dt * k1, a, b, c, n)
        k3 = _bw_rate(um, x + 0.5 * dt * k2, a, b, c, n)
        k4 = _bw_rate(u1, x + dt * k3, a, b, c, n)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check(x, guard, k + 1, "h")
        h[k + 1] = x
    return h


def _zhu_rhs(t, u, ud, x, y, h, m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n):
    force = k1 / tau * math.exp(-t / tau) * u
    sg = 1.0 if ud > 0 else (-1.0 if ud < 0 else 0.0)
    return (
        y,
        (force + h - c0 * y - k0 * (x - x0)) / m0,
        A * ud - beta * abs(ud) * _sgnpow(h, n) - gamma * ud * _abspow(h, n) + delta * u * sg,
    )


def zhu_rk4(t0, u, udot, dt, m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n, guard):
    u = np.asarray(u, dtype=np.float64)
    ud = np.asarray(udot, dtype=np.float64)
    m = u.size
    out = np.empty(m)
    x, y, h = float(x0), 0.0, 0.0
    out[0] = x
    p = (m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n)
    for k in range(m - 1):
        t = t0 + k * dt
        um, udm = 0.5 * (u[k] + u[k + 1]), 0.5 * (ud[k] + ud[k + 1])
        a1 = _zhu_rhs(t, u[k], ud[k], x, y, h, *p)
        a2 = _zhu_rhs(t + 0.5 * dt, um, udm, x + 0.5 * dt * a1[0], y + 0.5 * dt * a1[1], h + 0.5 * dt * a1[2], *p)
        a3 = _zhu_rhs(t + 0.5 * dt, um, udm, x + 0.5 * dt * a2[0], y + 0.5 * dt * a2[1], h + 0.5 * dt * a2[2], *p)
        a4 = _zhu_rhs(t + dt, u[k + 1], ud[k + 1], x + dt * a3[0], y + dt * a3[1], h + dt * a3[2], *p)
        x += dt / 6.0 * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0])
        y += dt / 6.0 * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1])
        h += dt / 6.0 * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2])
        _check(x, guard, k + 1, "x")
        _check(y, guard, k + 1, "dx/dt")
        _check(h, guard, k + 1, "h")
        out[k + 1] = x
    return out


def _closed_form_n1(v, S, c, rho, sigma):
    # hbar >= 0 candidates first, then hbar <= 0
    num = rho * v - S
    den = c + rho * v if v >= 0 else c - rho * (2 * sigma - 1) * v
    if den > 0:
        x = num / den
        if x >= 0:
            return x
    den = c - rho * v if v <= 0 else c + rho * (2 * sigma - 1) * v
    if den > 0:
        x = num / den
        if x <= 0:
            return x
    return None


def _residual(x, v, S, c, rho, sigma, n):
    ax = abs(x)
    p = _pow(ax, n)
    s = p if x >= 0 else -p
    f = c * x + S - rho * (v - sigma * abs(v) * s + (sigma - 1) * v * p)
    dp = n * _pow(ax, n - 1) if ax > 0 else (1.0 if n == 1 else 0.0)
    sx = 1.0 if x >= 0 else -1.0
    df = c + rho * dp * (sigma * abs(v) - (sigma - 1) * v * sx)
    return f, df


def _bracket(x0, f0, v, S, c, rho, sigma, n):
    d = max(abs(x0), 1e-3 * (abs(rho * v - S) / c + 1e-300), 1e-300)
    for _ in range(1100):
        a = x0 + d if f0 < 0 else x0 - d
        fa, _ = _residual(a, v, S, c, rho, sigma, n)
        if not (math.isfinite(a) and math.isfinite(fa)):
            return None
        if (f0 < 0 and fa >= 0) or (f0 > 0 and fa <= 0):
            return (x0, a) if f0 < 0 else (a, x0)
        x0 = a
        d *= 2.0
    return None


def solve_hbar(v, S, c, rho, sigma, n, x_prev, step):
    """Root of ``c*x + S = rho*(v - sigma|v| sgnpow(x,n) + (sigma-1) v |x|^n)``.

    Newton from ``x_prev``; bracket endpoints are collected on the way and
    bisection takes over whenever a step is unusable or leaves the bracket.
    """
    x = x_prev
    lo = hi = None
    for _ in range(NEWTON_MAX_ITER):
        f, df = _residual(x, v, S, c, rho, sigma, n)
        if f == 0:
            return x
        if not math.isfinite(f):
            raise SolverError("could not bracket the implicit hbar update", step)
        if f < 0:
            lo = x
        else:
            hi = x
        xn = x - f / df if df > 0 else math.nan
        if lo is not None and hi is not None:
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
        elif not math.isfinite(xn):
            br = _bracket(x, f, v, S, c, rho, sigma, n)
            if br is None:
                raise SolverError("could not bracket the implicit hbar update", step)
            lo, hi = br
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 4e-16 * max(abs(xn), abs(x)):
            return xn
        if lo is not None and hi is not None and (xn == lo or xn == hi):
            return xn
        x = xn
    raise SolverError("Newton iteration for hbar did not converge in 100 iterations", step)


def _step_hbar(v, S, c, rho, sigma, n, x_prev, closed_form, step):
    if closed_form and n == 1.0:
        x = _closed_form_n1(v, S, c, rho, sigma)
        if x is not None:
            return x
    return solve_hbar(v, S, c, rho, sigma, n, x_prev, step)


def fonbw_hbar(v, c, w2, rho, sigma, n, hbar0, memory, guard, closed_form):
    v = np.asarray(v, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    m = v.size
    hb = np.zeros(m)
    hb[0] = hbar0
    _check(hbar0, guard, 0, "hbar")
    for k in range(1, m):
        S = c * history_sum(w2, hb, k, memory)
        x = _step_hbar(v[k], S, c, rho, sigma, n, hb[k - 1], closed_form, k)
        _check(x, guard, k, "hbar")
        hb[k] = x
    return hb


def _poly_rest(coeffs, u):
    # sum_{i>=2} k_ui u^i
    acc = 0.0
    p = u
    for ci in coeffs[1:]:
        p *= u
        acc += ci * p
    return acc


def fonbw_compensate(hd, c1, w1, c2, w2, coeffs, k_h, rho, sigma, n, hbar0, memory, guard, iterations):
    hd = np.asarray(hd, dtype=np.float64)
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    coeffs = [float(x) for x in coeffs]
    ku1 = coeffs[0]
    m = hd.size
    u = np.zeros(m)
    drive = np.zeros(m)  # series the fractional derivative of u is taken on
    hb = np.zeros(m)
    hb[0] = hbar0
    ut = 0.0
    u[0] = (hd[0] - k_h * hbar0 - _poly_rest(coeffs, ut)) / ku1
    for k in range(1, m):
        S = c2 * history_sum(w2, hb, k, memory)
        if iterations == 0:
            ut = u[k - 1]
            drive[k] = ut
            v = c1 * (w1[0] * ut + history_sum(w1, drive, k, memory))
            x = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, k)
            uk = (hd[k] - k_h * x - _poly_rest(coeffs, ut)) / ku1
        else:
            hist = c1 * history_sum(w1, u, k, memory)
            uk = u[k - 1]
            for _ in range(iterations):
                v = c1 * w1[0] * uk + hist
                x = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, k)
                uk = (hd[k] - k_h * x - _poly_rest(coeffs, uk)) / ku1
            v = c1 * w1[0] * uk + hist
            x = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, k)
        _check(x, guard, k, "hbar")
        _check(uk, guard, k, "u")
        hb[k] = x
        u[k] = uk
    return u, hb


def bw_compensate(hd, dt, k_a, kbd, a, b, c, n, h0, guard):
    hd = np.asarray(hd, dtype=np.float64)
    m = hd.size
    u = np.zeros(m)
    hh = np.zeros(m)
    x = float(h0)
    hh[0] = x
    u[0] = (hd[0] - kbd * x) / k_a
    prev2 = 0.0  # u[k-2], zero before the record starts
    for k in range(1, m):
        ud = (u[k - 1] - prev2) / dt
        k1 = _bw_rate(ud, x, a, b, c, n)
        k2 = _bw_rate(ud, x + 0.5 * dt * k1, a, b, c, n)
        k3 = _bw_rate(ud, x + 0.5 * dt * k2, a, b, c, n)
        k4 = _bw_rate(ud, x + dt * k3, a, b, c, n)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check(x, guard, k, "h")
        hh[k] = x
        u[k] = (hd[k] - kbd * x) / k_a
        _check(u[k], guard, k, "u")
        prev2 = u[k - 1]
    return u, hh


def zhu_compensate(t0, hd, hd_dot, hd_ddot, dt, m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n, guard):
    hd = np.asarray(hd, dtype=np.float64)
    hd_dot = np.asarray(hd_dot, dtype=np.float64)
    hd_ddot = np.asarray(hd_ddot, dtype=np.float64)
    m = hd.size
    u = np.zeros(m)
    hh = np.zeros(m)
    h = 0.0

    def rate(uu, ud, h):
        sg = 1.0 if ud > 0 else (-1.0 if ud < 0 else 0.0)
        return A * ud - beta * abs(ud) * _sgnpow(h, n) - gamma * ud * _abspow(h, n) + delta * uu * sg

    def command(k, h):
        t = t0 + k * dt
        return tau * math.exp(t / tau) / k1 * (m0 * hd_ddot[k] + c0 * hd_dot[k] + k0 * (hd[k] - x0) - h)

    try:
        u[0] = command(0, h)
    except OverflowError:
        raise DivergenceError("command overflowed (exp(t/tau) out of range)", 0) from None
    _check(u[0], guard, 0, "u")
    prev2 = 0.0
    for k in range(1, m):
        ua, ub = prev2, u[k - 1]
        ud = (ub - ua) / dt
        um = 0.5 * (ua + ub)
        r1 = rate(ua, ud, h)
        r2 = rate(um, ud, h + 0.5 * dt * r1)
        r3 = rate(um, ud, h + 0.5 * dt * r2)
        r4 = rate(ub, ud, h + dt * r3)
        h = h + dt / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4)
        _check(h, guard, k, "h")
        hh[k] = h
        try:
            u[k] = command(k, h)
        except OverflowError:
            raise DivergenceError("command overflowed (exp(t/tau) out of range)", k) from None
        _check(u[k], guard, k, "u")
        prev2 = u[k - 1]
    return u, hh
