# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; mirrors ``_kernels_py`` function by function."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, pow, isfinite, NAN

from .errors import DivergenceError, InvalidArgument, SolverError

cnp.import_array()

cdef int NEWTON_MAX_ITER = 100


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    # eight partial sums break the add-latency chain and let the compiler pair lanes
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0
    cdef Py_ssize_t i = 0
    while i + 8 <= n:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        s4 += a[i + 4] * b[i + 4]
        s5 += a[i + 5] * b[i + 5]
        s6 += a[i + 6] * b[i + 6]
        s7 += a[i + 7] * b[i + 7]
        i += 8
    while i < n:
        s0 += a[i] * b[i]
        i += 1
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))


cdef inline double _sgnpow(double x, double n) noexcept nogil:
    if x > 0:
        return pow(x, n)
    if x < 0:
        return -pow(-x, n)
    return 0.0


cdef inline double _bw_rate(double ud, double h, double a, double b, double c, double n) noexcept nogil:
    return a * ud - b * fabs(ud) * _sgnpow(h, n) - c * ud * pow(fabs(h), n)


cdef inline bint _bad(double x, double guard) noexcept nogil:
    return not (fabs(x) <= guard)


def _diverged(what, guard, step):
    return DivergenceError(f"{what} diverged (|{what}| > {guard:g} or non-finite)", step)


cdef class _Rev:
    """Reversed weight table so GL sums become forward dot products."""
    cdef double[::1] wr
    cdef Py_ssize_t top

    def __init__(self, weights, Py_ssize_t need):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.shape[0] < need + 1:
            raise InvalidArgument("weight table too short for the requested memory")
        self.wr = w[: need + 1][::-1].copy()
        self.top = need

    # sum_{i=lo..L} w_i f[k-i]
    cdef inline double lagged(self, const double* f, Py_ssize_t k, Py_ssize_t L, Py_ssize_t lo) noexcept nogil:
        if L < lo:
            return 0.0
        return _dot(&self.wr[self.top - L], &f[k - L], L - lo + 1)


cdef inline Py_ssize_t _span(Py_ssize_t k, Py_ssize_t memory) noexcept nogil:
    if memory < 0 or k < memory:
        return k
    return memory


def gl_filter(weights, f, Py_ssize_t memory):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t m = fv.shape[0]
    cdef Py_ssize_t need = _span(m - 1, memory)
    cdef _Rev rev = _Rev(weights, need)
    out = np.empty(m)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(m):
            o[k] = rev.lagged(&fv[0], k, _span(k, memory), 0)
    return out


def history_sum(weights, h, Py_ssize_t k, Py_ssize_t memory):
    if k < 0:
        raise InvalidArgument(f"step index must be non-negative, got {k}")
    cdef Py_ssize_t L = _span(k, memory)
    if L == 0:
        return 0.0
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    if hv.shape[0] < k:
        raise InvalidArgument("history or weight table too short")
    cdef _Rev rev = _Rev(weights, L)
    return rev.lagged(&hv[0], k, L, 1)


def bw_rk4(udot, double dt, double a, double b, double c, double n, double h0, double guard):
    cdef const double[::1] ud = np.ascontiguousarray(udot, dtype=np.float64)
    cdef Py_ssize_t m = ud.shape[0], k
    out = np.empty(m)
    cdef double[::1] h = out
    cdef double x = h0, u0, u1, um, r1, r2, r3, r4
    cdef Py_ssize_t bad = -1
    h[0] = x
    with nogil:
        for k in range(m - 1):
            u0 = ud[k]
            u1 = ud[k + 1]
            um = 0.5 * (u0 + u1)
            r1 = _bw_rate(u0, x, a, b, c, n)
            r2 = _bw_rate(um, x + 0.5 * dt * r1, a, b, c, n)
            r3 = _bw_rate(um, x + 0.5 * dt * r2, a, b, c, n)
            r4 = _bw_rate(u1, x + dt * r3, a, b, c, n)
            x = x + dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
            if _bad(x, guard):
                bad = k + 1
                break
            h[k + 1] = x
    if bad >= 0:
        raise _diverged("h", guard, bad)
    return out


cdef inline void _zhu_rhs(double t, double u, double ud, double x, double y, double h,
                          double m0, double c0, double k0, double k1, double tau, double x0,
                          double A, double beta, double gamma, double delta, double n,
                          double* dx, double* dy, double* dh) noexcept nogil:
    cdef double sg = 1.0 if ud > 0 else (-1.0 if ud < 0 else 0.0)
    dx[0] = y
    dy[0] = (k1 / tau * exp(-t / tau) * u + h - c0 * y - k0 * (x - x0)) / m0
    dh[0] = A * ud - beta * fabs(ud) * _sgnpow(h, n) - gamma * ud * pow(fabs(h), n) + delta * u * sg


def zhu_rk4(double t0, u, udot, double dt, double m0, double c0, double k0, double k1, double tau,
            double x0, double A, double beta, double gamma, double delta, double n, double guard):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] ud = np.ascontiguousarray(udot, dtype=np.float64)
    cdef Py_ssize_t m = uv.shape[0], k
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double x = x0, y = 0.0, h = 0.0, t, um, udm
    cdef double ax[4]
    cdef double ay[4]
    cdef double ah[4]
    cdef Py_ssize_t bad = -1
    cdef int which = 0
    o[0] = x
    with nogil:
        for k in range(m - 1):
            t = t0 + k * dt
            um = 0.5 * (uv[k] + uv[k + 1])
            udm = 0.5 * (ud[k] + ud[k + 1])
            _zhu_rhs(t, uv[k], ud[k], x, y, h, m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n,
                     &ax[0], &ay[0], &ah[0])
            _zhu_rhs(t + 0.5 * dt, um, udm, x + 0.5 * dt * ax[0], y + 0.5 * dt * ay[0], h + 0.5 * dt * ah[0],
                     m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n, &ax[1], &ay[1], &ah[1])
            _zhu_rhs(t + 0.5 * dt, um, udm, x + 0.5 * dt * ax[1], y + 0.5 * dt * ay[1], h + 0.5 * dt * ah[1],
                     m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n, &ax[2], &ay[2], &ah[2])
            _zhu_rhs(t + dt, uv[k + 1], ud[k + 1], x + dt * ax[2], y + dt * ay[2], h + dt * ah[2],
                     m0, c0, k0, k1, tau, x0, A, beta, gamma, delta, n, &ax[3], &ay[3], &ah[3])
            x += dt / 6.0 * (ax[0] + 2 * ax[1] + 2 * ax[2] + ax[3])
            y += dt / 6.0 * (ay[0] + 2 * ay[1] + 2 * ay[2] + ay[3])
            h += dt / 6.0 * (ah[0] + 2 * ah[1] + 2 * ah[2] + ah[3])
            if _bad(x, guard):
                bad = k + 1
                which = 0
                break
            if _bad(y, guard):
                bad = k + 1
                which = 1
                break
            if _bad(h, guard):
                bad = k + 1
                which = 2
                break
            o[k + 1] = x
    if bad >= 0:
        raise _diverged(("x", "dx/dt", "h")[which], guard, bad)
    return out


cdef inline int _closed_form_n1(double v, double S, double c, double rho, double sigma, double* out) noexcept nogil:
    cdef double num = rho * v - S, den, x
    den = c + rho * v if v >= 0 else c - rho * (2 * sigma - 1) * v
    if den > 0:
        x = num / den
        if x >= 0:
            out[0] = x
            return 1
    den = c - rho * v if v <= 0 else c + rho * (2 * sigma - 1) * v
    if den > 0:
        x = num / den
        if x <= 0:
            out[0] = x
            return 1
    return 0


cdef inline void _residual(double x, double v, double S, double c, double rho, double sigma, double n,
                           double* f, double* df) noexcept nogil:
    cdef double ax = fabs(x)
    cdef double p = pow(ax, n)
    cdef double s = p if x >= 0 else -p
    cdef double dp, sx
    f[0] = c * x + S - rho * (v - sigma * fabs(v) * s + (sigma - 1) * v * p)
    if ax > 0:
        dp = n * pow(ax, n - 1)
    else:
        dp = 1.0 if n == 1 else 0.0
    sx = 1.0 if x >= 0 else -1.0
    df[0] = c + rho * dp * (sigma * fabs(v) - (sigma - 1) * v * sx)


# 0 ok, 1 no bracket, 2 no convergence
cdef int _bracket(double x0, double f0, double v, double S, double c, double rho, double sigma,
                  double n, double* lo, double* hi) noexcept nogil:
    cdef double d = fabs(x0), a, fa, df
    cdef int it
    if 1e-3 * (fabs(rho * v - S) / c + 1e-300) > d:
        d = 1e-3 * (fabs(rho * v - S) / c + 1e-300)
    if d < 1e-300:
        d = 1e-300
    for it in range(1100):
        a = x0 + d if f0 < 0 else x0 - d
        _residual(a, v, S, c, rho, sigma, n, &fa, &df)
        if not isfinite(a) or not isfinite(fa):
            return 1
        if (f0 < 0 and fa >= 0) or (f0 > 0 and fa <= 0):
            if f0 < 0:
                lo[0] = x0
                hi[0] = a
            else:
                lo[0] = a
                hi[0] = x0
            return 0
        x0 = a
        d *= 2.0
    return 1


cdef int _solve_hbar(double v, double S, double c, double rho, double sigma, double n,
                     double x_prev, double* out) noexcept nogil:
    # Newton from the previous state; bracket endpoints are collected on the way
    # and bisection takes over whenever a step is unusable or leaves the bracket
    cdef double x = x_prev, xn, f, df, lo = 0.0, hi = 0.0
    cdef bint have_lo = False, have_hi = False
    cdef int it
    for it in range(NEWTON_MAX_ITER):
        _residual(x, v, S, c, rho, sigma, n, &f, &df)
        if f == 0:
            out[0] = x
            return 0
        if not isfinite(f):
            return 1
        if f < 0:
            lo = x
            have_lo = True
        else:
            hi = x
            have_hi = True
        xn = x - f / df if df > 0 else NAN
        if have_lo and have_hi:
            if not (lo < xn and xn < hi):
                xn = 0.5 * (lo + hi)
        elif not isfinite(xn):
            if _bracket(x, f, v, S, c, rho, sigma, n, &lo, &hi):
                return 1
            have_lo = True
            have_hi = True
            xn = 0.5 * (lo + hi)
        if fabs(xn - x) <= 4e-16 * (fabs(xn) if fabs(xn) > fabs(x) else fabs(x)):
            out[0] = xn
            return 0
        if have_lo and have_hi and (xn == lo or xn == hi):
            out[0] = xn
            return 0
        x = xn
    return 2


cdef inline int _step_hbar(double v, double S, double c, double rho, double sigma, double n,
                           double x_prev, bint closed_form, double* out) noexcept nogil:
    if closed_form and n == 1.0:
        if _closed_form_n1(v, S, c, rho, sigma, out):
            return 0
    return _solve_hbar(v, S, c, rho, sigma, n, x_prev, out)


def _solver_failure(int status, Py_ssize_t step):
    if status == 1:
        return SolverError("could not bracket the implicit hbar update", step)
    return SolverError("Newton iteration for hbar did not converge in 100 iterations", step)


def solve_hbar(double v, double S, double c, double rho, double sigma, double n, double x_prev, Py_ssize_t step):
    cdef double x
    cdef int status = _solve_hbar(v, S, c, rho, sigma, n, x_prev, &x)
    if status:
        raise _solver_failure(status, step)
    return x


def fonbw_hbar(v, double c, w2, double rho, double sigma, double n, double hbar0,
               Py_ssize_t memory, double guard, bint closed_form):
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t m = vv.shape[0], k, bad = -1
    cdef _Rev rev = _Rev(w2, _span(m - 1, memory))
    out = np.zeros(m)
    cdef double[::1] hb = out
    cdef double S, x
    cdef int status = 0
    if _bad(hbar0, guard):
        raise _diverged("hbar", guard, 0)
    hb[0] = hbar0
    with nogil:
        for k in range(1, m):
            S = c * rev.lagged(&hb[0], k, _span(k, memory), 1)
            status = _step_hbar(vv[k], S, c, rho, sigma, n, hb[k - 1], closed_form, &x)
            if status:
                bad = k
                break
            if _bad(x, guard):
                bad = k
                break
            hb[k] = x
    if bad >= 0:
        if status:
            raise _solver_failure(status, bad)
        raise _diverged("hbar", guard, bad)
    return out


cdef inline double _poly_rest(const double[::1] coeffs, double u) noexcept nogil:
    cdef double acc = 0.0, p = u
    cdef Py_ssize_t i
    for i in range(1, coeffs.shape[0]):
        p *= u
        acc += coeffs[i] * p
    return acc


def fonbw_compensate(hd, double c1, w1, double c2, w2, coeffs, double k_h, double rho, double sigma,
                     double n, double hbar0, Py_ssize_t memory, double guard, int iterations):
    cdef const double[::1] hdv = np.ascontiguousarray(hd, dtype=np.float64)
    cdef const double[::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t m = hdv.shape[0], k, L, bad = -1
    cdef _Rev r1 = _Rev(w1, _span(m - 1, memory))
    cdef _Rev r2 = _Rev(w2, _span(m - 1, memory))
    cdef double w10 = np.ascontiguousarray(w1, dtype=np.float64)[0]
    u_arr = np.zeros(m)
    hb_arr = np.zeros(m)
    drive_arr = np.zeros(m)
    cdef double[::1] u = u_arr
    cdef double[::1] hb = hb_arr
    cdef double[::1] drive = drive_arr
    cdef double ku1 = cf[0], S, v, x = 0.0, ut, uk = 0.0, hist
    cdef int status = 0, it
    cdef int which = 0
    hb[0] = hbar0
    u[0] = (hdv[0] - k_h * hbar0 - _poly_rest(cf, 0.0)) / ku1
    with nogil:
        for k in range(1, m):
            L = _span(k, memory)
            S = c2 * r2.lagged(&hb[0], k, L, 1)
            if iterations == 0:
                ut = u[k - 1]
                drive[k] = ut
                v = c1 * (w10 * ut + r1.lagged(&drive[0], k, L, 1))
                status = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, &x)
                if status:
                    bad = k
                    break
                uk = (hdv[k] - k_h * x - _poly_rest(cf, ut)) / ku1
            else:
                hist = c1 * r1.lagged(&u[0], k, L, 1)
                uk = u[k - 1]
                for it in range(iterations):
                    v = c1 * w10 * uk + hist
                    status = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, &x)
                    if status:
                        break
                    uk = (hdv[k] - k_h * x - _poly_rest(cf, uk)) / ku1
                if status:
                    bad = k
                    break
                v = c1 * w10 * uk + hist
                status = _step_hbar(v, S, c2, rho, sigma, n, hb[k - 1], True, &x)
                if status:
                    bad = k
                    break
            if _bad(x, guard):
                bad = k
                which = 0
                break
            if _bad(uk, guard):
                bad = k
                which = 1
                break
            hb[k] = x
            u[k] = uk
    if bad >= 0:
        if status:
            raise _solver_failure(status, bad)
        raise _diverged(("hbar", "u")[which], guard, bad)
    return u_arr, hb_arr


def bw_compensate(hd, double dt, double k_a, double kbd, double a, double b, double c, double n,
                  double h0, double guard):
    cdef const double[::1] hdv = np.ascontiguousarray(hd, dtype=np.float64)
    cdef Py_ssize_t m = hdv.shape[0], k, bad = -1
    u_arr = np.zeros(m)
    h_arr = np.zeros(m)
    cdef double[::1] u = u_arr
    cdef double[::1] hh = h_arr
    cdef double x = h0, ud, r1, r2, r3, r4, prev2 = 0.0
    cdef int which = 0
    hh[0] = x
    u[0] = (hdv[0] - kbd * x) / k_a
    with nogil:
        for k in range(1, m):
            ud = (u[k - 1] - prev2) / dt
            r1 = _bw_rate(ud, x, a, b, c, n)
            r2 = _bw_rate(ud, x + 0.5 * dt * r1, a, b, c, n)
            r3 = _bw_rate(ud, x + 0.5 * dt * r2, a, b, c, n)
            r4 = _bw_rate(ud, x + dt * r3, a, b, c, n)
            x = x + dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
            if _bad(x, guard):
                bad = k
                which = 0
                break
            hh[k] = x
            u[k] = (hdv[k] - kbd * x) / k_a
            if _bad(u[k], guard):
                bad = k
                which = 1
                break
            prev2 = u[k - 1]
    if bad >= 0:
        raise _diverged(("h", "u")[which], guard, bad)
    return u_arr, h_arr


cdef inline double _zhu_h_rate(double uu, double ud, double h, double A, double beta, double gamma,
                               double delta, double n) noexcept nogil:
    cdef double sg = 1.0 if ud > 0 else (-1.0 if ud < 0 else 0.0)
    return A * ud - beta * fabs(ud) * _sgnpow(h, n) - gamma * ud * pow(fabs(h), n) + delta * uu * sg


def zhu_compensate(double t0, hd, hd_dot, hd_ddot, double dt, double m0, double c0, double k0,
                   double k1, double tau, double x0, double A, double beta, double gamma, double delta,
                   double n, double guard):
    cdef const double[::1] hdv = np.ascontiguousarray(hd, dtype=np.float64)
    cdef const double[::1] hd1 = np.ascontiguousarray(hd_dot, dtype=np.float64)
    cdef const double[::1] hd2 = np.ascontiguousarray(hd_ddot, dtype=np.float64)
    cdef Py_ssize_t m = hdv.shape[0], k, bad = -1
    u_arr = np.zeros(m)
    h_arr = np.zeros(m)
    cdef double[::1] u = u_arr
    cdef double[::1] hh = h_arr
    cdef double h = 0.0, ua, ub, ud, um, r1, r2, r3, r4, prev2 = 0.0, e
    cdef int which = 0
    with nogil:
        for k in range(m):
            if k > 0:
                ua = prev2
                ub = u[k - 1]
                ud = (ub - ua) / dt
                um = 0.5 * (ua + ub)
                r1 = _zhu_h_rate(ua, ud, h, A, beta, gamma, delta, n)
                r2 = _zhu_h_rate(um, ud, h + 0.5 * dt * r1, A, beta, gamma, delta, n)
                r3 = _zhu_h_rate(um, ud, h + 0.5 * dt * r2, A, beta, gamma, delta, n)
                r4 = _zhu_h_rate(ub, ud, h + dt * r3, A, beta, gamma, delta, n)
                h = h + dt / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4)
                if _bad(h, guard):
                    bad = k
                    which = 0
                    break
                hh[k] = h
                prev2 = u[k - 1]
            e = exp((t0 + k * dt) / tau)
            if not isfinite(e):
                bad = k
                which = 2
                break
            u[k] = tau * e / k1 * (m0 * hd2[k] + c0 * hd1[k] + k0 * (hdv[k] - x0) - h)
            if _bad(u[k], guard):
                bad = k
                which = 1
                break
    if bad >= 0:
        if which == 2:
            raise DivergenceError("command overflowed (exp(t/tau) out of range)", bad)
        raise _diverged(("h", "u")[which], guard, bad)
    return u_arr, h_arr
