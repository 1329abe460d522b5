"""Two-weight bump constants and the log / loglog interpolation inequalities.

All suprema run over every dyadic cube of the mesh.  Functions returning a
supremum accept ``argmax=True`` to also return the maximizing cube.
"""
from __future__ import annotations

import math

import numpy as np

from .mesh import DyadicMesh, GridFunction, as_values
from .orlicz import luxemburg_rows
from .young import (YoungError, YoungFunction, b0, b0_loglog, conjugate_exponent, logbump,
                    loglogbump)

__all__ = [
    "ap_constant",
    "bump_joint",
    "bump_separated_A",
    "bump_separated_B",
    "gamma_log",
    "gamma_lemma",
    "interp_log_check",
    "interp_log_ratios",
    "interp_loglog_check",
    "balance_check",
    "random_probability_trials",
    "spike_trials",
]


def _sup(mesh: DyadicMesh, per_level, argmax: bool):
    best, where = -np.inf, (0, 0)
    for j, arr in enumerate(per_level):
        k = int(np.argmax(arr))
        if arr[k] > best:
            best, where = float(arr[k]), (j, k)
    if argmax:
        return best, mesh.cube(*where)
    return best


def _check_pair(u: GridFunction, sigma: GridFunction, p: float):
    u.require_positive("u")
    sigma.require_positive("sigma")
    if u.mesh != sigma.mesh:
        raise ValueError("u and sigma live on different meshes")
    if not p > 1:
        raise YoungError(f"p must exceed 1, got {p}")


def _means(w: GridFunction):
    return w.mesh.pyramid_means(w.values)


def _norms(w: GridFunction, expo: float, A: YoungFunction):
    mesh = w.mesh
    v = w.values ** expo
    return [luxemburg_rows(mesh.blocks(v, j), A) for j in range(mesh.depth + 1)]


def ap_constant(u: GridFunction, sigma: GridFunction, p: float, argmax: bool = False):
    """``max_Q <u>_Q^(1/p) <sigma>_Q^(1/p')``."""
    _check_pair(u, sigma, p)
    q = conjugate_exponent(p)
    vals = [mu ** (1 / p) * ms ** (1 / q) for mu, ms in zip(_means(u), _means(sigma))]
    return _sup(u.mesh, vals, argmax)


def bump_joint(u, sigma, A: YoungFunction, B: YoungFunction, p: float, argmax: bool = False):
    """``max_Q ||u^(1/p)||_{A,Q} ||sigma^(1/p')||_{B,Q}``."""
    _check_pair(u, sigma, p)
    q = conjugate_exponent(p)
    vals = [a * b for a, b in zip(_norms(u, 1 / p, A), _norms(sigma, 1 / q, B))]
    return _sup(u.mesh, vals, argmax)


def bump_separated_B(u, sigma, B: YoungFunction, p: float, argmax: bool = False):
    """``max_Q <u>_Q^(1/p) ||sigma^(1/p')||_{B,Q}``."""
    _check_pair(u, sigma, p)
    q = conjugate_exponent(p)
    vals = [mu ** (1 / p) * b for mu, b in zip(_means(u), _norms(sigma, 1 / q, B))]
    return _sup(u.mesh, vals, argmax)


def bump_separated_A(u, sigma, A: YoungFunction, p: float, argmax: bool = False):
    """``max_Q ||u^(1/p)||_{A,Q} <sigma>_Q^(1/p')``."""
    _check_pair(u, sigma, p)
    q = conjugate_exponent(p)
    vals = [a * ms ** (1 / q) for a, ms in zip(_norms(u, 1 / p, A), _means(sigma))]
    return _sup(u.mesh, vals, argmax)


def gamma_log(p: float, delta: float) -> float:
    """Decay exponent ``delta / (2 (p' - 1 + delta))`` of the log-bump summation."""
    if delta <= 0:
        raise YoungError("gamma_log needs delta > 0")
    q = conjugate_exponent(p)
    return delta / (2.0 * (q - 1.0 + delta))


def gamma_lemma(pprime: float, tau: float) -> float:
    """Interpolation exponent ``1 / (2 + 2 (p' - 1) / tau)``."""
    if not pprime > 1 or not tau > 0:
        raise YoungError("gamma_lemma needs p' > 1 and tau > 0")
    return 1.0 / (2.0 + (pprime - 1.0) * 2.0 / tau)


# -- interpolation -----------------------------------------------------------

def _as_rows(mu, f):
    mu = np.atleast_2d(np.asarray(as_values(mu) if isinstance(mu, GridFunction) else mu, float))
    f = np.atleast_2d(np.abs(np.asarray(as_values(f) if isinstance(f, GridFunction) else f, float)))
    if mu.shape != f.shape:
        raise ValueError("measure and function shapes differ")
    if np.any(mu < 0) or not np.allclose(mu.sum(axis=1), 1.0, rtol=1e-10):
        raise ValueError("mu must be a probability vector")
    return mu, f


def interp_log_ratios(mu, f, p: float, delta: float):
    """Row-wise ``||f||_{B0} / (||f||_B^(1-g) ||f||_{p'}^g)`` under each measure.

    ``B = logbump(p', delta)``, ``B0 = logbump(p', delta/2)`` and
    ``g = gamma_lemma(p', delta)``.  Returns ``(ratios, parts)``.
    """
    mu, f = _as_rows(mu, f)
    q = conjugate_exponent(p)
    B, B0 = logbump(q, delta), b0(q, delta)
    g = gamma_lemma(q, delta)
    nB0 = luxemburg_rows(f, B0, mu)
    nB = luxemburg_rows(f, B, mu)
    nq = np.sum(mu * f ** q, axis=1) ** (1 / q)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(nB0 > 0, nB0 / (nB ** (1 - g) * nq ** g), 0.0)
    return ratio, {"norm_B0": nB0, "norm_B": nB, "norm_pprime": nq, "gamma": g}


def interp_log_check(mu, f, p: float, delta: float, constant: float | None = None) -> dict:
    """Single-trial report for ``||f||_{B0,mu} <= C ||f||_{B,mu}^(1-g) ||f||_{p',mu}^g``."""
    r, parts = interp_log_ratios(mu, f, p, delta)
    rep = {
        "ratio": float(r[0]),
        "gamma": parts["gamma"],
        "norm_B0": float(parts["norm_B0"][0]),
        "norm_B": float(parts["norm_B"][0]),
        "norm_pprime": float(parts["norm_pprime"][0]),
    }
    if constant is not None:
        rep["constant"] = constant
        rep["passed"] = bool(rep["ratio"] <= constant)
    return rep


def interp_loglog_check(mu, f, p: float, delta: float, C: float = math.e,
                        n_bins: int = 16) -> dict:
    """Fit the loglog interpolation exponent ``kappa`` on a batch of trials.

    For ``B`` the loglog bump in ``p'`` and ``B0`` its ``delta/2`` variant, set
    ``r = ||f||_{p'} / ||f||_B`` and ``R = ||f||_{B0} / ||f||_B``.  The claim
    ``R <= C0 (log(C/r))^-kappa`` is fitted on the upper envelope of
    ``log R`` against ``log log(C/r)``; ``kappa`` is minus the envelope slope
    and ``C0`` the smallest constant making every trial satisfy the bound.
    """
    mu, f = _as_rows(mu, f)
    q = conjugate_exponent(p)
    B, B0 = loglogbump(q, delta), b0_loglog(q, delta)
    nB = luxemburg_rows(f, B, mu)
    nB0 = luxemburg_rows(f, B0, mu)
    nq = np.sum(mu * f ** q, axis=1) ** (1 / q)
    keep = nB > 0
    r = np.minimum(nq[keep] / nB[keep], 1.0)
    R = nB0[keep] / nB[keep]
    x = np.log(np.log(C / r))
    y = np.log(R)
    kappa = _envelope_slope(x, y, n_bins)
    kappa = max(0.0, -kappa)
    C0 = float(np.max(R * np.log(C / r) ** kappa)) if R.size else 0.0
    return {
        "kappa": kappa,
        "C0": C0,
        "p_kappa": p * kappa,
        "p_kappa_gt_1": bool(p * kappa > 1),
        "delta": delta,
        "delta_threshold": 1.0 / (p - 1.0),
        "trials": int(R.size),
        "min_r": float(r.min()) if r.size else float("nan"),
        "estimator": "fitted",
    }


def _envelope_slope(x, y, n_bins):
    if x.size < 3 or np.ptp(x) == 0:
        return 0.0
    edges = np.linspace(x.min(), x.max(), n_bins + 1)
    idx = np.clip(np.digitize(x, edges) - 1, 0, n_bins - 1)
    bx, by = [], []
    for b in range(n_bins):
        sel = idx == b
        if np.any(sel):
            k = np.argmax(np.where(sel, y, -np.inf))
            bx.append(x[k])
            by.append(y[k])
    if len(bx) < 2:
        return 0.0
    return float(np.polyfit(bx, by, 1)[0])


def balance_check(p: float, delta: float, t_max: float = 1e8, n: int = 200) -> dict:
    """Ratio ``B^-1(t)^(1-g) t^(g/p') / B0^-1(t)`` over a log grid in ``[1, t_max]``.

    ``g = gamma_log(p, delta)``.  Boundedness is judged by the log-log slope
    of the ratio against ``log t`` over the upper half of the grid.
    """
    q = conjugate_exponent(p)
    g = gamma_log(p, delta)
    B, B0 = logbump(q, delta), b0(q, delta)
    t = np.logspace(0, math.log10(t_max), n)
    ratio = B.inverse(t) ** (1 - g) * t ** (g / q) / B0.inverse(t)
    half = t >= math.sqrt(t_max)
    slope = float(np.polyfit(np.log(np.log(t[half])), np.log(ratio[half]), 1)[0])
    return {
        "gamma": g,
        "max_ratio": float(ratio.max()),
        "min_ratio": float(ratio.min()),
        "tail_slope": slope,
        "bounded": bool(np.all(np.isfinite(ratio)) and slope <= 0.05),
    }


# -- trial generators --------------------------------------------------------

def random_probability_trials(n_trials: int, n_atoms: int, seed: int, log_spread: float = 4.0):
    """Dirichlet masses and log-uniform nonnegative functions, one trial per row."""
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(n_atoms), size=n_trials)
    f = np.exp(rng.uniform(-log_spread, log_spread, size=(n_trials, n_atoms)))
    f *= rng.random((n_trials, n_atoms)) < 0.8
    f[:, 0] = np.maximum(f[:, 0], 1e-3)
    return mu, f


def spike_trials(heights, mass: float, n_atoms: int = 8):
    """One atom of mass ``mass`` carrying ``height``; the rest carry 1."""
    heights = np.asarray(heights, dtype=float)
    mu = np.full((heights.size, n_atoms), (1.0 - mass) / (n_atoms - 1))
    mu[:, 0] = mass
    f = np.ones((heights.size, n_atoms))
    f[:, 0] = heights
    return mu, f

