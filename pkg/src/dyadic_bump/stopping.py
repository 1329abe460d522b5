"""Principal-cube stopping forests, Carleson sequences and the decay profile.

Cubes of ``Q0`` whose level is ``level(Q0) + i (mod tau)`` are split into
classes ``K_a`` by ``2^a <= <u>^(1/p) <sigma>^(1/p') < 2^(a+1)``.  Within each
class the principal cubes are built top-down: a cube of ``K_a`` with no
principal ancestor in its class starts a tree, and a cube whose sigma-average
exceeds twice that of its current principal cube becomes a new principal
cube.  ``Pi(Q)`` is the minimal principal cube of the class containing ``Q``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bumps import bump_separated_B, gamma_log
from .mesh import DyadicCube, DyadicMesh, GridFunction, as_values
from .orlicz import luxemburg_rows, orlicz_maximal
from .shifts import HaarShift
from .young import b0, conjugate_exponent, logbump

__all__ = [
    "StoppingForest",
    "build_forest",
    "carleson_constant",
    "carleson_embedding_check",
    "decay_profile",
    "main_rhs",
    "main_inequality",
    "summation_in_a_check",
]


@dataclass
class StoppingForest:
    """Flat record of the residue class ``K`` of ``Q0`` and its principal cubes.

    Arrays are indexed by position in ``K`` (level-major, then flat index).
    ``pi[k]`` is the position of ``Pi(Q_k)``; ``generation[k]`` is ``n`` for
    principal cubes in ``P^a_n`` and ``-1`` otherwise.
    """

    mesh: DyadicMesh
    root: DyadicCube
    p: float
    tau: int
    residue: int
    levels: np.ndarray
    indices: np.ndarray
    a: np.ndarray
    principal: np.ndarray
    generation: np.ndarray
    pi: np.ndarray
    u_avg: np.ndarray
    sigma_avg: np.ndarray

    def __len__(self):
        return int(self.levels.size)

    @property
    def volumes(self) -> np.ndarray:
        return np.exp2(-self.mesh.dim * self.levels.astype(float))

    @property
    def mu(self) -> np.ndarray:
        """``mu_Q = |Q|`` on principal cubes, ``0`` elsewhere."""
        return np.where(self.principal, self.volumes, 0.0)

    @property
    def a_range(self) -> tuple[int, int]:
        return (int(self.a.min()), int(self.a.max())) if len(self) else (0, -1)

    @property
    def classes(self) -> list[int]:
        return sorted(int(x) for x in np.unique(self.a))

    def cube(self, k: int) -> DyadicCube:
        return self.mesh.cube(int(self.levels[k]), int(self.indices[k]))

    def principal_cubes(self, a: int | None = None) -> list[int]:
        sel = self.principal if a is None else self.principal & (self.a == a)
        return [int(k) for k in np.flatnonzero(sel)]

    def generations(self, a: int) -> list[list[DyadicCube]]:
        sel = self.principal & (self.a == a)
        if not np.any(sel):
            return []
        top = int(self.generation[sel].max())
        return [[self.cube(k) for k in np.flatnonzero(sel & (self.generation == n))]
                for n in range(top + 1)]

    def position(self, Q: DyadicCube) -> int:
        hits = np.flatnonzero((self.levels == Q.level) & (self.indices == self.mesh.flat_index(Q)))
        if hits.size == 0:
            raise KeyError(f"{Q} is not in the residue class")
        return int(hits[0])

    def to_json(self) -> str:
        nodes = [{
            "cube": [int(self.levels[k]), int(self.indices[k])],
            "a": int(self.a[k]),
            "generation": int(self.generation[k]),
            "principal": [int(self.levels[self.pi[k]]), int(self.indices[self.pi[k]])],
            "u_avg": float(self.u_avg[k]),
            "sigma_avg": float(self.sigma_avg[k]),
            "mu": float(self.mu[k]),
        } for k in range(len(self))]
        doc = {"root": [self.root.level, self.mesh.flat_index(self.root)], "p": self.p,
               "tau": self.tau, "residue": self.residue, "a_range": list(self.a_range),
               "nodes": nodes}
        return json.dumps(doc, sort_keys=True)


def _cubes_inside(mesh: DyadicMesh, Q0: DyadicCube, level: int) -> np.ndarray:
    anc = mesh.ancestor_index
    cells = mesh.cells_of(Q0)
    return np.unique(anc[level][cells])


def build_forest(u, sigma, p: float, Q0: DyadicCube | None = None, tau: int = 1,
                 i: int = 0) -> StoppingForest:
    """Build the ``K_a`` classes, principal cubes and ``Pi`` for one residue ``i``."""
    uv, sv = as_values(u), as_values(sigma)
    mesh = u.mesh if isinstance(u, GridFunction) else sigma.mesh
    if np.any(uv <= 0) or np.any(sv <= 0):
        raise ValueError("weights must be positive")
    if tau < 1 or not 0 <= i < tau:
        raise ValueError("need tau >= 1 and 0 <= i < tau")
    Q0 = Q0 or mesh.root()
    q = conjugate_exponent(p)
    um, sm = mesh.pyramid_means(uv), mesh.pyramid_means(sv)
    levels = list(range(Q0.level + i, mesh.depth + 1, tau))

    L_, I_, A_, U_, S_ = [], [], [], [], []
    for lv in levels:
        idx = _cubes_inside(mesh, Q0, lv)
        x = um[lv][idx] ** (1 / p) * sm[lv][idx] ** (1 / q)
        _, e = np.frexp(x)
        L_.append(np.full(idx.size, lv))
        I_.append(idx)
        A_.append(e - 1)
        U_.append(um[lv][idx])
        S_.append(sm[lv][idx])
    lev = np.concatenate(L_) if L_ else np.zeros(0, np.int64)
    ind = np.concatenate(I_) if I_ else np.zeros(0, np.int64)
    a = np.concatenate(A_).astype(np.int64) if A_ else np.zeros(0, np.int64)
    uavg = np.concatenate(U_) if U_ else np.zeros(0)
    savg = np.concatenate(S_) if S_ else np.zeros(0)
    K = lev.size
    principal = np.zeros(K, dtype=bool)
    generation = np.full(K, -1, dtype=np.int64)
    pi = np.full(K, -1, dtype=np.int64)
    if K:
        classes, a_id = np.unique(a, return_inverse=True)
        cur = np.full((classes.size, mesh.n_cells), -1, dtype=np.int64)
        start = 0
        for lv, idx in zip(levels, I_):
            pos = np.arange(start, start + idx.size)
            start += idx.size
            cells = mesh.blocks(np.arange(mesh.n_cells), lv)[idx]      # (n, m)
            cls = a_id[pos]
            cand = cur[cls, cells[:, 0]]
            new_tree = cand < 0
            safe = np.where(new_tree, 0, cand)
            stops = ~new_tree & (savg[pos] > 2.0 * savg[safe])
            is_p = new_tree | stops
            principal[pos] = is_p
            generation[pos[new_tree]] = 0
            generation[pos[stops]] = generation[cand[stops]] + 1
            pi[pos] = np.where(is_p, pos, cand)
            rows = np.repeat(cls[is_p], cells.shape[1])
            cur[rows, cells[is_p].ravel()] = np.repeat(pos[is_p], cells.shape[1])
    return StoppingForest(mesh, Q0, float(p), int(tau), int(i), lev, ind, a, principal,
                          generation, pi, uavg, savg)


def _subtree_sums(forest: StoppingForest, weights: np.ndarray) -> list[np.ndarray]:
    """For every dyadic cube R inside Q0: sum of ``weights`` over K cubes inside R."""
    mesh = forest.mesh
    per = [np.zeros(mesh.n_cubes(j)) for j in range(mesh.depth + 1)]
    for j in range(mesh.depth + 1):
        sel = forest.levels == j
        if np.any(sel):
            np.add.at(per[j], forest.indices[sel], weights[sel])
    for j in range(mesh.depth - 1, -1, -1):
        per[j] = per[j] + mesh.children_view(per[j + 1], j).sum(axis=1)
    return per


def carleson_constant(forest: StoppingForest, per_class: bool = False):
    """``max_a sup_{R in Q0} sum_{Q in P^a, Q in R} |Q| / |R|``."""
    mesh = forest.mesh
    Q0 = forest.root
    out = {}
    for a in forest.classes:
        w = np.where(forest.a == a, forest.mu, 0.0)
        sums = _subtree_sums(forest, w)
        best = 0.0
        for j in range(Q0.level, mesh.depth + 1):
            idx = _cubes_inside(mesh, Q0, j)
            best = max(best, float(np.max(sums[j][idx] / 2.0 ** (-mesh.dim * j))))
        out[a] = best
    if per_class:
        return out
    return max(out.values()) if out else 0.0


def _level_mins(mesh: DyadicMesh, F: np.ndarray) -> list[np.ndarray]:
    return [mesh.blocks(F, j).min(axis=1) for j in range(mesh.depth + 1)]


def carleson_embedding_check(forest: StoppingForest, F, factor: float = 4.0) -> dict:
    """Per class, ``sum_{P in P^a} |P| inf_P F / int_{Q0} F`` against ``factor * Carleson``."""
    mesh = forest.mesh
    Fv = as_values(F)
    if np.any(Fv < 0):
        raise ValueError("F must be nonnegative")
    mins = _level_mins(mesh, Fv)
    inf_Q = np.array([mins[int(j)][int(k)] for j, k in zip(forest.levels, forest.indices)])
    total = float(Fv[mesh.cells_of(forest.root)].sum() * mesh.cell_volume)
    carl = carleson_constant(forest, per_class=True)
    ratios = {}
    for a in forest.classes:
        num = float(np.sum(np.where(forest.a == a, forest.mu * inf_Q, 0.0)))
        ratios[a] = num / total if total > 0 else 0.0
    worst = max(ratios, key=lambda a: ratios[a] / carl[a]) if ratios else None
    return {
        "ratios": ratios,
        "carleson": carl,
        "max_ratio": max(ratios.values()) if ratios else 0.0,
        "max_normalized": ratios[worst] / carl[worst] if ratios else 0.0,
        "factor": factor,
        "passed": all(ratios[a] <= factor * carl[a] * (1 + 1e-12) for a in ratios),
    }


@dataclass
class DecayProfile:
    a: int
    cube: DyadicCube
    t_grid: np.ndarray
    fraction: np.ndarray
    c: float
    intercept: float
    r2: float
    nonempty: int
    n_cubes: int

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.c)

    def as_dict(self):
        return {"a": self.a, "cube": str(self.cube), "c": self.c, "r2": self.r2,
                "nonempty": self.nonempty, "n_cubes": self.n_cubes,
                "t_grid": self.t_grid.tolist(), "fraction": self.fraction.tolist(),
                "estimator": "fitted"}


def _triple_groups(S: HaarShift, forest: StoppingForest) -> np.ndarray:
    """Position in ``K`` of each triple's base cube, or -1."""
    mesh = forest.mesh
    offs = mesh.level_offsets
    lookup = np.full(mesh.total_cubes, -1, dtype=np.int64)
    lookup[offs[forest.levels] + forest.indices] = np.arange(len(forest))
    return lookup[offs[S.base_level] + S.base_index]


def restricted_sum(S: HaarShift, sigma, forest: StoppingForest, a: int, P: DyadicCube) -> np.ndarray:
    """``S_{K_a(P)}(sigma) = sum_{Q in K_a, Pi(Q) = P} S_Q(sigma)``."""
    kP = forest.position(P)
    grp = _triple_groups(S, forest)
    ok = grp >= 0
    sel = np.zeros(S.n_triples)
    sel[ok] = ((forest.a[grp[ok]] == a) & (forest.pi[grp[ok]] == kP)).astype(float)
    return S.apply_values(as_values(sigma), sel)


def _fit(t, frac):
    ok = frac > 0
    n = int(ok.sum())
    if n < 4:
        return math.inf, 0.0, float("nan"), n
    x, y = t[ok], np.log(frac[ok])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(-coef[0]), float(coef[1]), r2, n


def decay_profile(S: HaarShift, sigma, u, forest: StoppingForest, a: int, P: DyadicCube,
                  t_grid=None) -> DecayProfile:
    """``u(x in P : |S_{K_a(P)} sigma| > t sigma(P)/|P|) / u(P)`` over ``t_grid`` and a fit of
    ``log`` of it against ``-c t``.  Fewer than four nonempty points gives ``c = inf``.

    ``t_grid`` defaults to ``0, 1, 2, ...`` past the largest value; ``"breakpoints"``
    samples the exceedance at every attained value instead.
    """
    if not S.is_positive:
        raise ValueError("decay profiles are defined for positive shifts")
    mesh = forest.mesh
    sv, uv = as_values(sigma), as_values(u)
    kP = forest.position(P)
    if forest.a[kP] != a or not forest.principal[kP]:
        raise ValueError(f"{P} is not a principal cube of class {a}")
    vals = restricted_sum(S, sv, forest, a, P)
    cells = mesh.cells_of(P)
    scale = float(sv[cells].mean())
    x = np.abs(vals[cells]) / scale
    w = uv[cells]
    n_cubes = int(np.sum((forest.a == a) & (forest.pi == kP)))
    if isinstance(t_grid, str) and t_grid == "breakpoints":
        # the exceedance is a step function; sample it where it jumps
        t_grid = np.unique(x)[:-1]
        if t_grid.size == 0:
            t_grid = np.zeros(1)
    elif t_grid is None:
        # unit steps of the sigma-average of P
        t_grid = np.arange(0.0, math.floor(float(x.max())) + 2.0)
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(x)
    xs, cw = x[order], np.cumsum(w[order][::-1])[::-1]
    pos = np.searchsorted(xs, t_grid, side="right")
    frac = np.where(pos < xs.size, cw[np.minimum(pos, xs.size - 1)], 0.0) / w.sum()
    c, b, r2, n = _fit(t_grid, frac)
    return DecayProfile(int(a), P, t_grid, frac, c, b, r2, n, n_cubes)


def main_rhs(u, sigma, p: float, forest: StoppingForest) -> float:
    """``sum_a (sum_{P in P^a} u(P) (sigma(P)/|P|)^p)^(1/p)`` on a frozen forest."""
    mesh = forest.mesh
    uv, sv = as_values(u), as_values(sigma)
    total = 0.0
    for a in forest.classes:
        acc = 0.0
        for k in forest.principal_cubes(a):
            Q = forest.cube(k)
            cells = mesh.cells_of(Q)
            acc += uv[cells].mean() * Q.volume * sv[cells].mean() ** p
        total += acc ** (1 / p)
    return float(total)


def main_inequality(S: HaarShift, u, sigma, p: float, Q0: DyadicCube | None = None) -> dict:
    """``||sum_{R in Q0} S_R sigma||_{L^p(u)}`` against ``tau * sum_i main_rhs(forest_i)``."""
    mesh = S.mesh
    Q0 = Q0 or mesh.root()
    uv, sv = as_values(u), as_values(sigma)
    inside = (S.base_level >= Q0.level)
    if np.any(inside):
        from .shifts import _ancestor_flat
        anc = _ancestor_flat(mesh, np.maximum(S.base_level, Q0.level), S.base_index, Q0.level)
        inside &= anc == mesh.flat_index(Q0)
    lhs_vals = S.apply_values(sv, inside.astype(float))
    lhs = float((np.sum(np.abs(lhs_vals) ** p * uv) * mesh.cell_volume) ** (1 / p))
    rhs = sum(main_rhs(uv, sv, p, build_forest(GridFunction(mesh, uv), GridFunction(mesh, sv),
                                                 p, Q0, S.tau, i)) for i in range(S.tau))
    return {"lhs": lhs, "rhs": rhs, "tau": S.tau, "ratio": lhs / (S.tau * rhs) if rhs else 0.0,
            "estimator": "fitted"}


def summation_in_a_check(u, sigma, p: float, delta: float, Q0: DyadicCube | None = None,
                         tau: int = 1, i: int = 0, rtol: float = 1e-9) -> dict:
    """Verify the per-principal-cube chain behind the decay factor in ``a``.

    For every principal cube ``Q`` of class ``a``, with ``B = logbump(p', delta)``,
    ``B0 = logbump(p', delta/2)``, ``K = bump_separated_B(u, sigma, B, p)``,
    ``gamma = gamma_log(p, delta)`` and ``x = <u>^(1/p) <sigma>^(1/p')``::

        <u><sigma>^p <= <u> (2 ||s'||_{B0} ||s||_{B0bar})^p                 (Hoelder)
                     <= <u> (C1 ||s'||_B^(1-g) <sigma>^(g/p') 2 ||s||_{B0bar})^p  (interp)
                     <= (2 C1)^p K^((1-g)p) x^(gp) ||s||_{B0bar}^p          (K)
                     <= (2 C1)^p K^((1-g)p) 2^((a+1)gp) ||s||_{B0bar}^p     (class)
                     <= (2 C1)^p K^((1-g)p) 2^((a+1)gp) inf_Q M_{B0bar}(s chi_Q0)^p

    with ``s = sigma^(1/p)``, ``s' = sigma^(1/p')`` and ``C1`` the largest
    interpolation ratio met on the principal cubes (recorded, not assumed).
    """
    uv, sv = as_values(u), as_values(sigma)
    mesh = u.mesh if isinstance(u, GridFunction) else sigma.mesh
    Q0 = Q0 or mesh.root()
    q = conjugate_exponent(p)
    no_decay = delta <= 0
    g = 0.0 if no_decay else gamma_log(p, delta)
    B, B0 = logbump(q, delta), b0(q, delta)
    B0bar = B0.complement()
    K = bump_separated_B(GridFunction(mesh, uv), GridFunction(mesh, sv), B, p)
    forest = build_forest(GridFunction(mesh, uv), GridFunction(mesh, sv), p, Q0, tau, i)
    s_p = sv ** (1 / p)
    s_q = sv ** (1 / q)
    chi = np.zeros(mesh.n_cells)
    chi[mesh.cells_of(Q0)] = 1.0
    Mfun = orlicz_maximal(GridFunction(mesh, s_p * chi), B0bar).values
    mins = _level_mins(mesh, Mfun)

    ks = forest.principal_cubes()
    if not ks:
        return {"gamma": g, "K": float(K), "C1": 0.0, "cubes": 0, "violations": 0,
                "link_violations": {}, "worst_slack": math.inf, "a_range": [0, -1],
                "geometric": None, "no_decay_flag": bool(no_decay), "passed": True}
    nB0, nB, nB0bar = [], [], []
    for k in ks:
        j, idx = int(forest.levels[k]), int(forest.indices[k])
        rq = mesh.blocks(s_q, j)[idx][None, :]
        rp = mesh.blocks(s_p, j)[idx][None, :]
        nB0.append(luxemburg_rows(rq, B0)[0])
        nB.append(luxemburg_rows(rq, B)[0])
        nB0bar.append(luxemburg_rows(rp, B0bar)[0])
    nB0, nB, nB0bar = map(np.asarray, (nB0, nB, nB0bar))
    ks = np.asarray(ks)
    ua, sa, acl = forest.u_avg[ks], forest.sigma_avg[ks], forest.a[ks]
    inf_M = np.array([mins[int(forest.levels[k])][int(forest.indices[k])] for k in ks])
    x = ua ** (1 / p) * sa ** (1 / q)

    lhs = ua * sa ** p
    step_holder = ua * (2 * nB0 * nB0bar) ** p
    interp = nB0 / (nB ** (1 - g) * sa ** (g / q))
    C1 = float(interp.max())
    step_interp = ua * (C1 * nB ** (1 - g) * sa ** (g / q) * 2 * nB0bar) ** p
    pref = (2 * C1) ** p
    step_K = pref * K ** ((1 - g) * p) * x ** (g * p) * nB0bar ** p
    step_class = pref * K ** ((1 - g) * p) * 2.0 ** ((acl + 1) * g * p) * nB0bar ** p
    step_max = pref * K ** ((1 - g) * p) * 2.0 ** ((acl + 1) * g * p) * inf_M ** p
    chain = [lhs, step_holder, step_interp, step_K, step_class, step_max]
    names = ["holder", "interp", "K", "class", "maximal"]
    viol = {nm: int(np.sum(chain[n] > chain[n + 1] * (1 + rtol)))
            for n, nm in enumerate(names)}
    a_lo, a_hi = forest.a_range
    if no_decay:
        geo = None
    else:
        r = 2.0 ** (-g * p)
        geo = {"ratio": r, "partial_sum": float(sum(2.0 ** (a * g * p)
                                                   for a in range(a_lo, a_hi + 1))),
               "limit": 2.0 ** (a_hi * g * p) / (1 - r)}
    return {
        "gamma": g,
        "K": float(K),
        "C1": C1,
        "cubes": int(ks.size),
        "violations": int(sum(viol.values())),
        "link_violations": viol,
        "worst_slack": float(np.min(step_max / lhs)),
        "a_range": [a_lo, a_hi],
        "geometric": geo,
        "no_decay_flag": bool(no_decay),
        "passed": sum(viol.values()) == 0,
    }
