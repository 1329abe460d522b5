"""Luxemburg norms over dyadic cubes, generalized Hölder, dyadic maximal operators."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _backend, _fallback
from .mesh import DyadicCube, DyadicMesh, GridFunction, MeshError, as_values
from .young import BumpComplement, BumpYoung, LinftyIndicator, YoungFunction

__all__ = [
    "luxemburg_rows",
    "luxemburg_norm",
    "luxemburg_levels",
    "holder_product_check",
    "holder_ratios",
    "dyadic_maximal",
    "orlicz_maximal",
    "weighted_maximal",
    "lp_norm",
    "weak_norm",
    "lorentz21_indicator",
    "maximal_ratio",
]


def luxemburg_rows(vals, A: YoungFunction, weights=None, backend=None, rtol=1e-12) -> np.ndarray:
    """Luxemburg norm of every row of ``vals``.

    Each row holds the cell values of one cube (or the atoms of a discrete
    probability measure with the matching row of ``weights``).  The norm is
    ``inf{lam > 0 : sum_k w_k A(|v_k| / lam) <= 1}``, found by Illinois
    regula falsi in ``log lam`` inside the bracket ``[mean|v|, max|v|] / A^{-1}(1)``.
    """
    vals = np.ascontiguousarray(np.abs(np.asarray(vals, dtype=float)))
    if vals.ndim == 1:
        vals = vals[None, :]
    if weights is not None:
        weights = np.ascontiguousarray(np.broadcast_to(np.asarray(weights, dtype=float), vals.shape))
    if isinstance(A, LinftyIndicator):
        masked = vals if weights is None else np.where(weights > 0, vals, 0.0)
        return masked.max(axis=1) / A.c
    ainv1 = A.unit_inverse()
    if isinstance(A, BumpYoung):
        kern = _backend.get(backend)
        return _chunked(lambda v, w: kern.luxemburg_rows(v, w, *A.params, ainv1, rtol),
                        vals, weights)
    if isinstance(A, BumpComplement):
        kern = _backend.get(backend)
        return _chunked(lambda v, w: kern.luxemburg_rows_dual(v, w, *A.base.params, ainv1, rtol),
                        vals, weights)
    return _fallback.luxemburg_rows_generic(vals, weights, A._eval, ainv1, rtol)


_MIN_ROWS_PER_THREAD = 2048


def _chunked(fn, vals, weights) -> np.ndarray:
    """Run a row kernel, split across ``DYADIC_BUMP_THREADS`` threads for large inputs."""
    n_threads = min(_backend.threads(), vals.shape[0] // _MIN_ROWS_PER_THREAD)
    if n_threads <= 1:
        return np.asarray(fn(vals, weights))
    bounds = np.linspace(0, vals.shape[0], n_threads + 1).astype(int)
    parts = [(vals[a:b], None if weights is None else weights[a:b])
             for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(n_threads) as pool:
        out = list(pool.map(lambda vw: np.asarray(fn(*vw)), parts))
    return np.concatenate(out)


def luxemburg_norm(f: GridFunction, Q: DyadicCube, A: YoungFunction, backend=None) -> float:
    """``||f||_{A,Q}``; zero iff ``f`` vanishes on ``Q``."""
    return float(luxemburg_rows(f.restrict(Q)[None, :], A, backend=backend)[0])


def luxemburg_levels(f, mesh: DyadicMesh, A: YoungFunction, backend=None) -> list[np.ndarray]:
    """Luxemburg norms of ``f`` on every cube, one array per level."""
    v = np.abs(as_values(f))
    return [luxemburg_rows(mesh.blocks(v, j), A, backend=backend) for j in range(mesh.depth + 1)]


def holder_ratios(F, G, A: YoungFunction, weights=None, backend=None) -> np.ndarray:
    """Row-wise ``<|fg|> / (||f||_A ||g||_Abar)``; bounded by 2 for exact complements."""
    F = np.abs(np.asarray(F, dtype=float))
    G = np.abs(np.asarray(G, dtype=float))
    if weights is None:
        lhs = np.mean(F * G, axis=1)
    else:
        lhs = np.sum(weights * F * G, axis=1)
    nf = luxemburg_rows(F, A, weights, backend)
    ng = luxemburg_rows(G, A.complement(), weights, backend)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(lhs > 0, lhs / (nf * ng), 0.0)


def holder_product_check(f: GridFunction, g: GridFunction, Q: DyadicCube, A: YoungFunction,
                         constant: float = 2.0, rtol: float = 1e-9) -> dict:
    """Check ``<|fg|>_Q <= 2 ||f||_{A,Q} ||g||_{Abar,Q}`` and return the ratio."""
    lhs = float(np.mean(np.abs(f.restrict(Q) * g.restrict(Q))))
    nf = luxemburg_norm(f, Q, A)
    ng = float(luxemburg_rows(g.restrict(Q)[None, :], A.complement())[0])
    ratio = lhs / (nf * ng) if lhs > 0 else 0.0
    return {
        "lhs": lhs,
        "norm_f": nf,
        "norm_g": ng,
        "ratio": ratio,
        "constant": constant,
        "passed": bool(ratio <= constant * (1 + rtol)),
    }


def _max_over_levels(mesh: DyadicMesh, per_level: list[np.ndarray]) -> np.ndarray:
    out = mesh.upsample(per_level[0], 0)
    for j in range(1, mesh.depth + 1):
        out = np.maximum(out, mesh.upsample(per_level[j], j))
    return out


def dyadic_maximal(f: GridFunction) -> GridFunction:
    """``Mf(x) = max_{Q ∋ x} <|f|>_Q`` over the dyadic cubes of the mesh."""
    mesh = f.mesh
    means = mesh.pyramid_means(np.abs(f.values))
    return GridFunction(mesh, _max_over_levels(mesh, means))


def orlicz_maximal(f: GridFunction, A: YoungFunction, backend=None) -> GridFunction:
    """``M_A f(x) = max_{Q ∋ x} ||f||_{A,Q}``."""
    mesh = f.mesh
    return GridFunction(mesh, _max_over_levels(mesh, luxemburg_levels(f, mesh, A, backend)))


def weighted_maximal(f: GridFunction, sigma: GridFunction) -> GridFunction:
    """``M(f sigma)``."""
    sigma.require_positive("sigma")
    return dyadic_maximal(f * sigma)


def lp_norm(f, w, p: float, mesh: DyadicMesh | None = None) -> float:
    """``(int |f|^p w dx)^(1/p)``; ``w=None`` means Lebesgue measure."""
    fv = np.abs(as_values(f))
    mesh = mesh or getattr(f, "mesh", None)
    vol = mesh.cell_volume if mesh is not None else 1.0 / fv.size
    wv = 1.0 if w is None else as_values(w)
    return float(np.sum(fv ** p * wv) * vol) ** (1.0 / p)


def weak_norm(g, u: GridFunction, p: float) -> float:
    """``sup_t t u({|g| > t})^(1/p)``.

    ``g`` is piecewise constant, so the supremum is the maximum over attained
    values ``v`` of ``v u({|g| >= v})^(1/p)`` (the limit ``t -> v^-``).
    """
    u.require_positive("u")
    gv = np.abs(as_values(g))
    mass = u.values * u.mesh.cell_volume
    order = np.argsort(-gv, kind="stable")
    vals = gv[order]
    cum = np.cumsum(mass[order])
    # the level set {|g| >= v} includes every cell tied with v
    last_of_tie = np.r_[vals[1:] != vals[:-1], True]
    cand = vals[last_of_tie] * cum[last_of_tie] ** (1.0 / p)
    return float(cand.max()) if cand.size else 0.0


def lorentz21_indicator(Q: DyadicCube, u: GridFunction) -> float:
    """``||chi_Q||_{L^{2,1}(u)}`` normalized as ``2 u(Q)^(1/2)``.

    With this constant, ``int_Q g u <= weak_norm(g, u, 2) * lorentz21_indicator(Q, u)``
    for every ``g``: integrate ``min(u(Q), W^2/t^2)`` over ``t``.
    """
    u.require_positive("u")
    uq = float(u.restrict(Q).sum() * u.mesh.cell_volume)
    return 2.0 * uq ** 0.5


def maximal_ratio(f, u: GridFunction, sigma: GridFunction, p: float) -> float:
    """``||M(f sigma)||_{L^p(u)} / ||f||_{L^p(sigma)}`` for one test function."""
    mesh = u.mesh
    fv = as_values(f)
    den = lp_norm(fv, sigma, p, mesh)
    if den == 0:
        raise MeshError("test function vanishes")
    Mf = dyadic_maximal(GridFunction(mesh, fv * sigma.values))
    return lp_norm(Mf, u, p) / den
