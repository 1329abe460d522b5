"""Truncated Hilbert transform on a one-dimensional dyadic grid.

``H f(x) = int_{|x-y| > eps} f(y) / (x - y) dy`` (no ``1/pi``).  For
piecewise-constant ``f`` the integral over each cell is a difference of
logarithms, so on cell centers ``H`` is an antisymmetric Toeplitz matrix
applied by FFT convolution.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, eigsh

from .mesh import DyadicCube, DyadicMesh, GridFunction, MeshError, as_values
from .orlicz import lorentz21_indicator, lp_norm, maximal_ratio, weak_norm

__all__ = [
    "hilbert_kernel",
    "hilbert_apply",
    "hilbert_at",
    "hilbert_l2_norm",
    "hilbert_testing",
    "mw_duality_check",
    "czm_rhs",
    "counterexample_search",
    "cascade_pair",
]

_CHUNK = 1 << 22


def _check_mesh(mesh: DyadicMesh):
    if mesh.dim != 1:
        raise MeshError("the Hilbert transform is implemented for d=1 only")


def _eps(mesh: DyadicMesh, eps):
    h = mesh.cell_volume
    eps = h if eps is None else float(eps)
    if eps < 0.5 * h * (1 - 1e-12):
        raise ValueError("eps must be at least half a cell width")
    return eps


def _segment_integral(lo, hi, eps):
    """``int_{[lo,hi] minus (-eps,eps)} ds / s`` elementwise."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    out = np.zeros(lo.shape)
    a = np.maximum(lo, eps)
    pos = hi > a
    out[pos] += np.log(hi[pos] / a[pos])
    b = np.minimum(hi, -eps)
    neg = lo < b
    out[neg] += np.log(-b[neg] / -lo[neg])
    return out


def hilbert_kernel(n_cells: int, eps=None, h: float | None = None) -> np.ndarray:
    """Coefficients ``c_d``, ``d = -(n-1) .. n-1``, so that ``(Hf)_k = sum_i c_{k-i} f_i``."""
    h = 1.0 / n_cells if h is None else h
    eps = h if eps is None else eps
    d = np.arange(-(n_cells - 1), n_cells, dtype=float)
    return _segment_integral((d - 0.5) * h, (d + 0.5) * h, eps)


def _conv_same(values, c, n):
    return fftconvolve(values, c, mode="full")[n - 1:2 * n - 1]


def hilbert_apply(f, eps=None) -> GridFunction:
    """``H f`` at every cell center."""
    mesh = f.mesh
    _check_mesh(mesh)
    eps = _eps(mesh, eps)
    n = mesh.n_cells
    return GridFunction(mesh, _conv_same(f.values, hilbert_kernel(n, eps), n))


def hilbert_at(f: GridFunction, x, eps=None) -> np.ndarray:
    """``H f`` at arbitrary points ``x`` in ``[0, 1)``, by direct summation."""
    mesh = f.mesh
    _check_mesh(mesh)
    eps = _eps(mesh, eps)
    h = mesh.cell_volume
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = np.arange(mesh.n_cells) * h
    seg = _segment_integral(x[:, None] - a[None, :] - h, x[:, None] - a[None, :], eps)
    return seg @ f.values


def hilbert_l2_norm(mesh: DyadicMesh, eps=None, seed: int = 0) -> float:
    """Operator norm of ``H_eps`` on ``L^2(dx)`` of the grid (Lanczos on ``H^T H``)."""
    _check_mesh(mesh)
    eps = _eps(mesh, eps)
    n = mesh.n_cells
    c = hilbert_kernel(n, eps)
    cr = c[::-1]

    def normal(v):
        return _conv_same(_conv_same(v, c, n), cr, n)

    if n <= 64:
        C = np.array([_conv_same(e, c, n) for e in np.eye(n)]).T
        return float(np.linalg.norm(C, 2))
    op = LinearOperator((n, n), matvec=normal, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    lam = eigsh(op, k=1, which="LA", v0=v0, tol=1e-12, return_eigenvectors=False)
    return float(math.sqrt(lam[0]))


# -- testing constants -------------------------------------------------------

def _local_transforms(w: np.ndarray, mesh: DyadicMesh, level: int, c_full: np.ndarray):
    """``H(chi_Q w)`` restricted to ``Q`` for all cubes of ``level``: ``(n_cubes, m)``."""
    n = mesh.n_cells
    m = mesh.cells_per_cube(level)
    W = mesh.blocks(w, level)
    k = c_full[n - m:n + m - 1]
    return fftconvolve(W, k[None, :], mode="full", axes=1)[:, m - 1:2 * m - 1]


def _global_sq_norms(w: np.ndarray, weight: np.ndarray, mesh: DyadicMesh, level: int,
                     c_full: np.ndarray) -> np.ndarray:
    """``int |H(chi_Q w)|^2 weight dx`` for all cubes of ``level``."""
    n = mesh.n_cells
    m = mesh.cells_per_cube(level)
    W = mesh.blocks(w, level)
    nq = W.shape[0]
    out = np.empty(nq)
    rows = max(1, _CHUNK // (2 * n + m))
    xs = np.arange(n)
    for s in range(0, nq, rows):
        e = min(nq, s + rows)
        G = fftconvolve(W[s:e], c_full[None, :], mode="full", axes=1)
        idx = (n - 1 - np.arange(s, e) * m)[:, None] + xs[None, :]
        vals = np.take_along_axis(G, idx, axis=1)
        out[s:e] = (vals ** 2) @ weight * mesh.cell_volume
    return out


def hilbert_testing(u: GridFunction, sigma: GridFunction, eps=None, local: bool = True,
                    argmax: bool = False):
    """Testing constants ``(T_sigma, T_u)``.

    ``T_sigma = max_Q int_Q |H(chi_Q sigma)|^2 u / sigma(Q)`` and
    ``T_u = max_Q int_Q |H(chi_Q u)|^2 sigma / u(Q)``.  With ``local=False`` the
    integrals run over the whole interval instead of ``Q``.
    """
    mesh = u.mesh
    _check_mesh(mesh)
    u.require_positive("u")
    sigma.require_positive("sigma")
    eps = _eps(mesh, eps)
    n = mesh.n_cells
    c = hilbert_kernel(n, eps)
    uv, sv = u.values, sigma.values
    best = {"sigma": (-np.inf, None), "u": (-np.inf, None)}
    for j in range(mesh.depth + 1):
        vol = mesh.cell_volume
        for key, w, other in (("sigma", sv, uv), ("u", uv, sv)):
            mass = mesh.level_sums(w, j) * vol
            if local:
                Hq = _local_transforms(w, mesh, j, c)
                num = (Hq ** 2 * mesh.blocks(other, j)).sum(axis=1) * vol
            else:
                num = _global_sq_norms(w, other, mesh, j, c)
            r = num / mass
            k = int(np.argmax(r))
            if r[k] > best[key][0]:
                best[key] = (float(r[k]), (j, k))
    Ts, Tu = best["sigma"][0], best["u"][0]
    if argmax:
        return (Ts, Tu), (mesh.cube(*best["sigma"][1]), mesh.cube(*best["u"][1]))
    return Ts, Tu


def mw_duality_check(u: GridFunction, sigma: GridFunction, f, Q: DyadicCube, eps=None) -> dict:
    """``int_Q |H_sigma f| u <= ||H_sigma f||_{L^{2,inf}(u)} ||chi_Q||_{L^{2,1}(u)}``."""
    mesh = u.mesh
    _check_mesh(mesh)
    fv = as_values(f)
    g = hilbert_apply(GridFunction(mesh, fv * sigma.values), eps)
    cells = mesh.cells_of(Q)
    lhs = float(np.sum(np.abs(g.values[cells]) * u.values[cells]) * mesh.cell_volume)
    signed = float(np.sum(g.values[cells] * u.values[cells]) * mesh.cell_volume)
    W = weak_norm(g, u, 2.0)
    rhs = W * lorentz21_indicator(Q, u)
    return {"lhs": lhs, "lhs_signed": signed, "weak_norm": W, "rhs": rhs,
            "slack": rhs - lhs, "passed": bool(rhs - lhs >= -1e-12 * max(1.0, rhs))}


# -- two-weight norms --------------------------------------------------------

def _candidates(mesh: DyadicMesh, budget: int, seed: int, max_level: int = 4):
    """Deterministic test functions: ones, dyadic indicators, random positive."""
    out = [np.ones(mesh.n_cells)]
    for j in range(1, min(max_level, mesh.depth) + 1):
        for k in range(mesh.n_cubes(j)):
            out.append(mesh.upsample(np.eye(mesh.n_cubes(j))[k], j))
    rng = np.random.default_rng(seed)
    while len(out) < budget:
        out.append(rng.exponential(size=mesh.n_cells))
    return out[:max(budget, 1)]


def _maximal_lower_bound(u, sigma, cands) -> float:
    return max(maximal_ratio(f, u, sigma, 2.0) for f in cands)


def _hilbert_weighted_norm(u: GridFunction, sigma: GridFunction, eps, seed: int) -> float:
    """``||H(. sigma)||_{L^2(sigma) -> L^2(u)}`` as the top singular value of
    ``u^(1/2) C sigma^(1/2)`` (Lanczos; a lower bound up to convergence)."""
    mesh = u.mesh
    n = mesh.n_cells
    c = hilbert_kernel(n, eps)
    cr = c[::-1]
    su, ss = np.sqrt(u.values), np.sqrt(sigma.values)

    def normal(v):
        y = su * _conv_same(ss * v, c, n)
        return ss * _conv_same(su * y, cr, n)

    if n <= 64:
        C = np.array([_conv_same(e, c, n) for e in np.eye(n)]).T
        return float(np.linalg.norm(su[:, None] * C * ss[None, :], 2))
    op = LinearOperator((n, n), matvec=normal, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    lam = eigsh(op, k=1, which="LA", v0=v0, tol=1e-13, return_eigenvectors=False)
    return float(math.sqrt(max(lam[0], 0.0)))


def czm_rhs(u: GridFunction, sigma: GridFunction, eps=None, p: float = 2.0, budget: int = 32,
            seed: int = 0) -> dict:
    """Left side and the four right-hand terms of the two-weight testing bound for ``H``.

    ``m_sigma``, ``m_u`` are lower bounds for ``||M(. sigma)||_{L^2(sigma)->L^2(u)}`` and
    ``||M(. u)||_{L^2(u)->L^2(sigma)}`` over ``budget`` candidates; ``t_sigma``,
    ``t_u`` are the exact suprema ``||H(chi_Q sigma)||_{L^2(u)} / sigma(Q)^(1/2)`` and
    its mirror; ``lhs`` is ``||H(. sigma)||_{L^2(sigma)->L^2(u)}``.
    """
    if p != 2:
        raise ValueError("only p=2 is supported")
    mesh = u.mesh
    _check_mesh(mesh)
    eps = _eps(mesh, eps)
    cands = _candidates(mesh, budget, seed)
    m_sigma = _maximal_lower_bound(u, sigma, cands)
    m_u = _maximal_lower_bound(sigma, u, cands)
    Ts, Tu = hilbert_testing(u, sigma, eps, local=False)
    t_sigma, t_u = math.sqrt(Ts), math.sqrt(Tu)
    lhs = _hilbert_weighted_norm(u, sigma, eps, seed)
    rhs = m_sigma + m_u + t_sigma + t_u
    return {
        "lhs": lhs,
        "m_sigma": m_sigma,
        "m_u": m_u,
        "t_sigma": t_sigma,
        "t_u": t_u,
        "rhs": rhs,
        "ratio": lhs / rhs,
        "estimators": {"lhs": "lower bound", "m_sigma": "lower bound", "m_u": "lower bound",
                       "t_sigma": "exact", "t_u": "exact"},
    }


# -- counterexample search ---------------------------------------------------

def cascade_pair(L: int, eta_u: float, eta_s: float, seed: int, coupling: float = 0.0):
    """Exact-martingale cascades ``(u, sigma)`` on ``[0,1)`` at depth ``L``.

    Each parent splits into factors ``1 + eta r`` and ``1 - eta r``.  With
    ``coupling = 1`` the signs of ``sigma``'s draws oppose ``u``'s.
    """
    if not (0 <= eta_u < 1 and 0 <= eta_s < 1):
        raise ValueError("cascade amplitudes must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    u = np.ones(1)
    s = np.ones(1)
    for _ in range(L):
        ru = rng.uniform(-1, 1, u.size)
        rs = (1 - coupling) * rng.uniform(-1, 1, u.size) - coupling * ru
        fu = np.stack([1 + eta_u * ru, 1 - eta_u * ru], axis=1).ravel()
        fs = np.stack([1 + eta_s * rs, 1 - eta_s * rs], axis=1).ravel()
        u = np.repeat(u, 2) * fu
        s = np.repeat(s, 2) * fs
    mesh = DyadicMesh(1, L)
    return GridFunction(mesh, u), GridFunction(mesh, s)


def _weak_ratio(u, sigma, eps, cands) -> tuple[float, int]:
    mesh = u.mesh
    best, arg = 0.0, 0
    for i, f in enumerate(cands):
        g = hilbert_apply(GridFunction(mesh, f * sigma.values), eps)
        den = lp_norm(f, sigma, 2.0, mesh)
        r = weak_norm(g, u, 2.0) / den
        if r > best:
            best, arg = r, i
    return best, arg


def _search_candidates(u, sigma, eps, n_random: int, rng) -> list[np.ndarray]:
    mesh = u.mesh
    cands = [np.ones(mesh.n_cells)]
    for j in range(1, min(3, mesh.depth) + 1):
        for k in range(mesh.n_cubes(j)):
            chi = mesh.upsample(np.eye(mesh.n_cubes(j))[k], j)
            cands.append(chi)
            # the dual extremizer H_u(chi_Q)
            cands.append(hilbert_apply(GridFunction(mesh, chi * u.values), eps).values)
    for _ in range(n_random):
        cands.append(rng.standard_normal(mesh.n_cells))
    return cands


def _coarsen(w: GridFunction, level: int) -> GridFunction:
    return GridFunction(DyadicMesh(1, level), w.mesh.level_means(w.values, level))


def counterexample_search(seed: int, budget: int, L: int, L_min: int | None = None,
                          m_threshold: float = 4.0, penalty: float = 10.0,
                          n_random: int = 4) -> dict:
    """Search cascade pairs for large weak-type ratios of ``H_sigma`` at bounded maximal norms.

    The objective at depth ``L`` is ``max_f ||H_sigma f||_{L^{2,inf}(u)} / ||f||_{L^2(sigma)}``
    over a candidate set, minus ``penalty`` times the excess of the empirical
    maximal norms (both directions) over ``m_threshold``.  ``budget=0`` evaluates
    the constant pair only.  The winner is then re-evaluated on its own coarse
    averages at depths ``L_min .. L``.  This is evidence gathering only.
    """
    rng = np.random.default_rng(seed)
    L_min = max(2, L - 4) if L_min is None else L_min
    mesh = DyadicMesh(1, L)
    m_cands = _candidates(mesh, 16, seed)

    def score(params):
        u, s = cascade_pair(L, *params)
        eps = _eps(u.mesh, None)
        crng = np.random.default_rng(params[2])
        ratio, _ = _weak_ratio(u, s, eps, _search_candidates(u, s, eps, n_random, crng))
        m1 = _maximal_lower_bound(u, s, m_cands)
        m2 = _maximal_lower_bound(s, u, m_cands)
        excess = max(0.0, m1 - m_threshold) + max(0.0, m2 - m_threshold)
        return ratio - penalty * excess, ratio, m1, m2

    best_params = (0.0, 0.0, int(rng.integers(2 ** 31)), 0.0)
    best = score(best_params)
    history = [{"params": list(best_params), "objective": best[0]}]
    for step in range(budget):
        if step % 2 == 0 or best_params[0] == 0.0:
            params = (float(rng.uniform(0, 0.95)), float(rng.uniform(0, 0.95)),
                      int(rng.integers(2 ** 31)), float(rng.uniform(0, 1)))
        else:
            eu, es, sd, cp = best_params
            params = (float(np.clip(eu + rng.normal(0, 0.1), 0, 0.95)),
                      float(np.clip(es + rng.normal(0, 0.1), 0, 0.95)),
                      sd, float(np.clip(cp + rng.normal(0, 0.2), 0, 1)))
        sc = score(params)
        history.append({"params": list(params), "objective": sc[0]})
        if sc[0] > best[0]:
            best, best_params = sc, params

    u, s = cascade_pair(L, *best_params)
    trajectory = []
    for Lp in range(L_min, L + 1):
        uc, sc_ = _coarsen(u, Lp), _coarsen(s, Lp)
        eps = _eps(uc.mesh, None)
        crng = np.random.default_rng(best_params[2])
        r, _ = _weak_ratio(uc, sc_, eps, _search_candidates(uc, sc_, eps, n_random, crng))
        mc = _candidates(uc.mesh, 16, seed)
        trajectory.append({"L": Lp, "ratio": r,
                           "m_sigma": _maximal_lower_bound(uc, sc_, mc),
                           "m_u": _maximal_lower_bound(sc_, uc, mc)})
    ratios = [t["ratio"] for t in trajectory]
    return {
        "seed": seed,
        "budget": budget,
        "params": {"eta_u": best_params[0], "eta_sigma": best_params[1],
                   "cascade_seed": best_params[2], "coupling": best_params[3]},
        "objective": best[0],
        "ratio": best[1],
        "m_sigma": best[2],
        "m_u": best[3],
        "m_threshold": m_threshold,
        "trajectory": trajectory,
        "non_decreasing": bool(all(b >= a * (1 - 1e-12) for a, b in zip(ratios, ratios[1:]))),
        "history": history,
        "label": "evidence trajectory, not a proof",
    }
