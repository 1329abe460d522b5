# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Signatures mirror :mod:`dyadic_bump._fallback`."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, pow, sqrt, fabs, exp, fmin, isfinite, isinf, INFINITY

cnp.import_array()

cdef double E = 2.718281828459045
cdef double EE = 15.154262241479262
cdef double LOG_TMAX = 709.0


cdef inline double fpow(double t, double p) noexcept nogil:
    # the exponents of the common bump families, without libm pow
    if p == 1.0:
        return t
    if p == 2.0:
        return t * t
    if p == 3.0:
        return t * t * t
    if p == 0.5:
        return sqrt(t)
    if p == 1.5:
        return t * sqrt(t)
    if p == 2.5:
        return t * t * sqrt(t)
    return pow(t, p)


cdef inline double bump(double t, double p, double a, double b, double scale) noexcept nogil:
    cdef double out
    if t <= 0.0:
        return 0.0
    out = scale * fpow(t, p)
    if a != 0.0:
        out *= fpow(log(E + t), a)
    if b != 0.0:
        out *= fpow(log(log(EE + t)), b)
    return out


cdef inline double bump_el(double t, double p, double a, double b, double scale,
                           double *tdA) noexcept nogil:
    """``A(t)``; stores ``t A'(t)`` in ``tdA``."""
    cdef double L, ell, M, out, r
    if t <= 0.0:
        tdA[0] = 0.0
        return 0.0
    L = log(E + t)
    out = scale * fpow(t, p)
    r = 0.0
    if a != 0.0:
        out *= fpow(L, a)
        r += a / ((E + t) * L)
    if b != 0.0:
        ell = log(EE + t)
        M = log(ell)
        out *= fpow(M, b)
        r += b / ((EE + t) * ell * M)
    tdA[0] = out * (p + t * r)
    return out


cdef inline double dlog_bump_deriv(double u, double p, double a, double b,
                                   double *tprime) noexcept nogil:
    """Return ``log(A'(t)/scale)`` at ``t = e^u`` and store ``t A''(t)/A'(t)`` in ``tprime``."""
    cdef double t = exp(u)
    cdef double L = log(E + t), ell = log(EE + t)
    cdef double M = log(ell)
    cdef double ra = a / ((E + t) * L)
    cdef double rb = b / ((EE + t) * ell * M)
    cdef double r = ra + rb
    cdef double dra = -a * (L + 1.0) / ((E + t) * L) ** 2
    cdef double drb = -b * (ell * M + M + 1.0) / ((EE + t) * ell * M) ** 2
    cdef double h = p + t * r
    tprime[0] = (p - 1.0) + t * r + t * (r + t * (dra + drb)) / h
    return (p - 1.0) * u + a * log(L) + b * log(M) + log(h)


cdef double bump_dual(double s, double p, double a, double b, double scale) noexcept nogil:
    """Legendre transform ``sup_t (s t - A(t))`` of a bump function."""
    cdef double tdA
    return bump_dual_el(s, p, a, b, scale, &tdA)


cdef double bump_dual_el(double s, double p, double a, double b, double scale,
                         double *sdAbar) noexcept nogil:
    """``Abar(s)``; stores ``s Abar'(s) = s t*`` (``A'(t*) = s``) in ``sdAbar``."""
    cdef double target, u, lo, hi, f, fp, step, nu, t, val
    cdef int k
    sdAbar[0] = 0.0
    if s <= scale * p:
        if p > 1.0:
            if s <= 0.0:
                return 0.0
        else:
            return 0.0
    target = log(s / scale)
    # A' is increasing: if it is still below s at the largest double, t* overflows
    if dlog_bump_deriv(LOG_TMAX, p, a, b, &fp) < target:
        sdAbar[0] = INFINITY
        return INFINITY
    if p > 1.0:
        u = (target - log(p)) / (p - 1.0)
        if u > LOG_TMAX:
            u = LOG_TMAX
        # s t* underflows, and Abar(s) <= s t* with it
        if log(s) + u < -746.0:
            return 0.0
        # one fixed-point pass for the log factors, then plain Newton
        t = exp(u)
        if a != 0.0 or b != 0.0:
            u = (target - log(p) - a * log(log(E + t)) - b * log(log(log(EE + t)))) / (p - 1.0)
        for k in range(12):
            f = dlog_bump_deriv(u, p, a, b, &fp) - target
            if not (fp > 0.0):
                break
            nu = u - f / fp
            if fabs(nu - u) <= 1e-14 * (1.0 if fabs(u) < 1.0 else fabs(u)):
                t = exp(nu)
                val = _legendre(s, t, p, a, b, scale)
                if val <= 0.0:
                    return 0.0
                sdAbar[0] = s * t
                return val
            u = nu
        u = fmin((target - log(p)) / (p - 1.0), LOG_TMAX)
    else:
        u = 0.0
    f = dlog_bump_deriv(u, p, a, b, &fp) - target
    lo = -1e300
    hi = 1e300
    if f < 0.0:
        lo = u
    else:
        hi = u
    step = 1.0
    for k in range(200):
        if lo > -1e300 and hi < 1e300:
            break
        if hi >= 1e300:
            nu = lo + step
            if dlog_bump_deriv(nu, p, a, b, &fp) - target >= 0.0:
                hi = nu
            else:
                lo = nu
        else:
            nu = hi - step
            if dlog_bump_deriv(nu, p, a, b, &fp) - target < 0.0:
                lo = nu
            else:
                hi = nu
        step *= 2.0
    u = 0.5 * (lo + hi)
    for k in range(100):
        f = dlog_bump_deriv(u, p, a, b, &fp) - target
        if f < 0.0:
            lo = u
        else:
            hi = u
        nu = u - f / fp
        if fabs(nu - u) <= 1e-14 * (1.0 if fabs(u) < 1.0 else fabs(u)):
            u = nu
            break
        if not (nu > lo and nu < hi):
            nu = 0.5 * (lo + hi)
        u = nu
    t = exp(u)
    val = _legendre(s, t, p, a, b, scale)
    if val <= 0.0:
        return 0.0
    sdAbar[0] = s * t
    return val


cdef inline double _legendre(double s, double t, double p, double a, double b,
                             double scale) noexcept nogil:
    """``s t - A(t)`` at ``A'(t) = s``; on overflow use ``s t (h - 1) / h``, ``h = t A'/A``."""
    cdef double val = s * t - bump(t, p, a, b, scale)
    cdef double L, ell, r
    if isfinite(val):
        return val
    if isinf(t):
        return INFINITY
    L = log(E + t)
    ell = log(EE + t)
    r = a / ((E + t) * L) + b / ((EE + t) * ell * log(ell))
    return s * t * (((p - 1.0) + t * r) / (p + t * r))


cdef inline double young_at(double t, double p, double a, double b, double scale,
                            bint dual) noexcept nogil:
    if dual:
        return bump_dual(t, p, a, b, scale)
    return bump(t, p, a, b, scale)


def bump_dual_eval(const double[::1] s, double p, double a, double b, double scale):
    cdef Py_ssize_t i, n = s.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = bump_dual(s[i], p, a, b, scale)
    return out


def bump_eval(const double[::1] t, double p, double a, double b, double scale):
    cdef Py_ssize_t i, n = t.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = bump(t[i], p, a, b, scale)
    return out


def luxemburg_rows(const double[:, ::1] vals, weights, double p, double a, double b,
                   double scale, double ainv1, double rtol=1e-12):
    """Luxemburg norm of each row of ``vals`` (nonnegative) for a bump function.

    ``weights`` is ``None`` (uniform) or a row-stochastic array of the same shape.
    """
    return _luxemburg(vals, weights, p, a, b, scale, ainv1, rtol, False)


def luxemburg_rows_dual(const double[:, ::1] vals, weights, double p, double a, double b,
                        double scale, double ainv1, double rtol=1e-12):
    """As :func:`luxemburg_rows` for the complementary function of the bump."""
    return _luxemburg(vals, weights, p, a, b, scale, ainv1, rtol, True)


cdef double _phi(const double[:, ::1] vals, const double[:, ::1] w, bint uniform, Py_ssize_t r,
                 double lam, double p, double a, double b, double scale,
                 bint dual, double *dphi) noexcept nogil:
    """``sum_k w_k A(v_k / lam)``; stores ``sum_k w_k tau_k A'(tau_k)`` in ``dphi``."""
    cdef Py_ssize_t k, m = vals.shape[1]
    cdef double wk, el, phi = 0.0, dsum = 0.0, inv_m = 1.0 / m
    for k in range(m):
        wk = inv_m if uniform else w[r, k]
        if wk > 0.0:
            if dual:
                phi += wk * bump_dual_el(vals[r, k] / lam, p, a, b, scale, &el)
            else:
                phi += wk * bump_el(vals[r, k] / lam, p, a, b, scale, &el)
            dsum += wk * el
    dphi[0] = dsum
    return phi


cdef _luxemburg(const double[:, ::1] vals, weights, double p, double a, double b,
                double scale, double ainv1, double rtol, bint dual):
    # Safeguarded Newton on g(x) = log phi(e^x), g'(x) = -sum w tau A'(tau) / phi.
    # |g'| >= 1 for any Young function, so |g| <= rtol/2 pins x to within rtol/2.
    # A step leaving the bracket falls back to regula falsi, then bisection.
    cdef Py_ssize_t n = vals.shape[0], m = vals.shape[1]
    cdef Py_ssize_t r, k, it
    cdef const double[:, ::1] w
    cdef bint uniform = weights is None
    cdef double mean, vmax, wk, inv_m = 1.0 / m
    cdef double xlo, xhi, glo, ghi, x, g, gp, phi, dphi, xn, width_tol = log(1.0 + rtol)
    if not uniform:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    else:
        w = np.zeros((1, 1))
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            mean = 0.0
            vmax = 0.0
            for k in range(m):
                wk = inv_m if uniform else w[r, k]
                if wk > 0.0:
                    mean += wk * vals[r, k]
                    if vals[r, k] > vmax:
                        vmax = vals[r, k]
            if vmax == 0.0:
                o[r] = 0.0
                continue
            xlo = log(mean / ainv1)
            xhi = log(vmax / ainv1)
            if xhi - xlo <= width_tol:
                o[r] = exp(0.5 * (xlo + xhi))
                continue
            glo = log(_phi(vals, w, uniform, r, exp(xlo), p, a, b, scale, dual, &dphi))
            if glo <= 0.0:
                o[r] = exp(xlo)
                continue
            ghi = log(_phi(vals, w, uniform, r, exp(xhi), p, a, b, scale, dual, &dphi))
            if ghi >= 0.0:
                o[r] = exp(xhi)
                continue
            x = xhi - ghi * (xhi - xlo) / (ghi - glo)
            if not (x > xlo and x < xhi):
                x = 0.5 * (xlo + xhi)
            for it in range(200):
                phi = _phi(vals, w, uniform, r, exp(x), p, a, b, scale, dual, &dphi)
                g = log(phi)
                if fabs(g) <= 0.5 * rtol:
                    break
                if g > 0.0:
                    xlo = x
                    glo = g
                else:
                    xhi = x
                    ghi = g
                if xhi - xlo <= width_tol:
                    x = 0.5 * (xlo + xhi)
                    break
                gp = -dphi / phi
                xn = x - g / gp if gp < 0.0 else xlo - 1.0
                if not (xn > xlo and xn < xhi):
                    xn = xhi - ghi * (xhi - xlo) / (ghi - glo)
                    if not (xn > xlo and xn < xhi) or it % 4 == 3:
                        xn = 0.5 * (xlo + xhi)
                x = xn
            o[r] = exp(x)
    return out


def window_max_abs(const double[:, ::1] contrib):
    """Per row, the largest ``|sum(contrib[row, j1:j2+1])|`` over windows."""
    cdef Py_ssize_t n = contrib.shape[0], K = contrib.shape[1]
    cdef Py_ssize_t r, k
    cdef double P, pmin, pmax, best, d
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            P = 0.0
            pmin = 0.0
            pmax = 0.0
            best = 0.0
            for k in range(K):
                P += contrib[r, k]
                d = P - pmin
                if d > best:
                    best = d
                d = pmax - P
                if d > best:
                    best = d
                if P < pmin:
                    pmin = P
                if P > pmax:
                    pmax = P
            o[r] = best
    return out
