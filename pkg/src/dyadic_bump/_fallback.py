"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
import math

import numpy as np

E = math.e
EE = math.exp(E)


def bump_eval(t, p, a, b, scale):
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = scale * t ** p
        if a:
            out = out * np.log(E + t) ** a
        if b:
            out = out * np.log(np.log(EE + t)) ** b
    return np.where(t > 0, out, 0.0)


def luxemburg_rows_generic(vals, weights, young_eval, ainv1, rtol=1e-12):
    """Row-wise Luxemburg norms for any vectorized Young function.

    Solves ``g(x) = log sum_k w_k A(v_k e^-x) = 0`` by the Illinois variant of
    regula falsi inside ``[log mean, log max] - log A^{-1}(1)``.  Since
    ``|g'| >= 1``, stopping at ``|g| <= rtol/2`` gives relative accuracy rtol.
    """
    vals = np.asarray(vals, dtype=float)
    n, m = vals.shape
    if weights is None:
        w = np.full((n, m), 1.0 / m)
    else:
        w = np.asarray(weights, dtype=float)
    mask = w > 0
    mean = np.sum(np.where(mask, w * vals, 0.0), axis=1)
    vmax = np.max(np.where(mask, vals, 0.0), axis=1)
    out = np.zeros(n)
    live = np.flatnonzero(vmax > 0)
    if live.size == 0:
        return out

    def g(rows, x):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = young_eval(vals[rows] * np.exp(-x)[:, None])
            phi = np.sum(np.where(mask[rows], w[rows] * a, 0.0), axis=1)
            return np.log(phi)

    width_tol = np.log1p(rtol)
    xlo = np.log(mean[live] / ainv1)
    xhi = np.log(vmax[live] / ainv1)
    res = 0.5 * (xlo + xhi)
    act = np.flatnonzero(xhi - xlo > width_tol)
    glo = np.zeros_like(xlo)
    ghi = np.zeros_like(xhi)
    if act.size:
        glo[act] = g(live[act], xlo[act])
        ghi[act] = g(live[act], xhi[act])
        at_lo = act[glo[act] <= 0]
        at_hi = act[(glo[act] > 0) & (ghi[act] >= 0)]
        res[at_lo] = xlo[at_lo]
        res[at_hi] = xhi[at_hi]
        act = act[(glo[act] > 0) & (ghi[act] < 0)]
    side = np.zeros_like(xlo, dtype=int)
    for _ in range(400):
        if act.size == 0:
            break
        lo, hi, gl, gh = xlo[act], xhi[act], glo[act], ghi[act]
        narrow = hi - lo <= width_tol
        with np.errstate(invalid="ignore", divide="ignore"):
            x = hi - gh * (hi - lo) / (gh - gl)
        bad = ~((x > lo) & (x < hi))
        x = np.where(bad, 0.5 * (lo + hi), x)
        x = np.where(narrow, 0.5 * (lo + hi), x)
        gx = g(live[act], x)
        done = narrow | (np.abs(gx) <= 0.5 * rtol)
        res[act] = x
        pos = (gx > 0) & ~done
        neg = (gx <= 0) & ~done
        a_pos, a_neg = act[pos], act[neg]
        ghi[a_pos[side[a_pos] == 1]] *= 0.5
        xlo[a_pos], glo[a_pos], side[a_pos] = x[pos], gx[pos], 1
        glo[a_neg[side[a_neg] == -1]] *= 0.5
        xhi[a_neg], ghi[a_neg], side[a_neg] = x[neg], gx[neg], -1
        act = act[~done]
    out[live] = np.exp(res)
    return out


def luxemburg_rows(vals, weights, p, a, b, scale, ainv1, rtol=1e-12):
    return luxemburg_rows_generic(vals, weights, lambda x: bump_eval(x, p, a, b, scale),
                                  ainv1, rtol)


def window_max_abs(contrib):
    contrib = np.asarray(contrib, dtype=float)
    n = contrib.shape[0]
    P = np.concatenate([np.zeros((n, 1)), np.cumsum(contrib, axis=1)], axis=1)
    run_min = np.minimum.accumulate(P, axis=1)
    run_max = np.maximum.accumulate(P, axis=1)
    up = np.max(P[:, 1:] - run_min[:, :-1], axis=1)
    down = np.max(run_max[:, :-1] - P[:, 1:], axis=1)
    return np.maximum(np.maximum(up, down), 0.0)


def bump_dual_eval(s, p, a, b, scale):
    from .young import BumpYoung, BumpComplement
    return BumpComplement(BumpYoung(p, a, b, scale))._eval(np.asarray(s, dtype=float))


def luxemburg_rows_dual(vals, weights, p, a, b, scale, ainv1, rtol=1e-12):
    from .young import BumpYoung, BumpComplement
    dual = BumpComplement(BumpYoung(p, a, b, scale))
    return luxemburg_rows_generic(vals, weights, dual._eval, ainv1, rtol)
