"""Generalized Haar shifts, sparse (Lerner) positive shifts and their estimators.

A shift is stored as a flat list of triples ``(Q, Q', h_{Q'}, Q'', h_{Q''})``
with ``Q'`` ``n`` levels and ``Q''`` ``m`` levels below the base cube ``Q``.
Each Haar function is given by one coefficient per dyadic child, so

    S f = sum_t |Q_t|^-1 (f, h'_t) h''_t.

Internally this is ``G2^T diag(1/|Q|) G1`` with sparse ``G1, G2`` of shape
``(T, N)``; neither the product nor any dense ``N x N`` matrix is formed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from . import _backend
from .mesh import DyadicCube, DyadicMesh, GridFunction, MeshError, as_values
from .young import conjugate_exponent

__all__ = [
    "ShiftError",
    "HaarFunction",
    "HaarShift",
    "SparseFamily",
    "NormEstimate",
    "apply",
    "adjoint",
    "random_shift",
    "random_sparse_family",
    "lerner_shift",
    "maximal_truncation",
    "weighted_norm_estimate",
    "power_iteration",
    "testing_constant",
    "dual_testing_constant",
    "localization_split",
]


class ShiftError(ValueError):
    pass


@dataclass(frozen=True)
class HaarFunction:
    """``h = sum_k c_k chi_{child_k(Q)}`` with ``|c_k| <= 1``."""

    cube: DyadicCube
    coeffs: tuple

    def __post_init__(self):
        if any(abs(c) > 1 + 1e-12 for c in self.coeffs):
            raise ShiftError("Haar coefficients must lie in [-1, 1]")

    @property
    def is_cancellative(self) -> bool:
        return abs(float(np.sum(self.coeffs))) <= 1e-12

    @property
    def is_positive(self) -> bool:
        return all(c >= 0 for c in self.coeffs)


def _ancestor_flat(mesh: DyadicMesh, level, index, target):
    """Flat index at level ``target`` of the ancestors of cubes ``(level, index)``."""
    level = np.asarray(level)
    index = np.asarray(index, dtype=np.int64)
    up = level - target
    if np.any(up < 0):
        raise MeshError("target level below cube level")
    if mesh.dim == 1:
        return index >> up
    n = np.left_shift(1, level)
    r, c = index // n, index % n
    return ((r >> up) << target) | (c >> up)


class HaarShift:
    """A generalized dyadic Haar shift of complexity ``(m, n)``.

    Parameters
    ----------
    mesh : DyadicMesh
    m, n : int
        Depth of ``Q''`` (output side) and ``Q'`` (input side) below the base cube.
    base_level, base_index : array_like of int
        Base cube of every triple.
    q1, q2 : array_like of int
        Flat indices of ``Q'`` (level ``base+n``) and ``Q''`` (level ``base+m``).
    c1, c2 : array_like, shape (T, 2**d)
        Child coefficients of ``h_{Q'}`` and ``h_{Q''}``.
    """

    def __init__(self, mesh: DyadicMesh, m: int, n: int, base_level, base_index, q1, c1, q2, c2):
        self.mesh = mesh
        self.m, self.n = int(m), int(n)
        self.base_level = np.asarray(base_level, dtype=np.int64).reshape(-1)
        self.base_index = np.asarray(base_index, dtype=np.int64).reshape(-1)
        self.q1 = np.asarray(q1, dtype=np.int64).reshape(-1)
        self.q2 = np.asarray(q2, dtype=np.int64).reshape(-1)
        k = 1 << mesh.dim
        self.c1 = np.asarray(c1, dtype=float).reshape(-1, k)
        self.c2 = np.asarray(c2, dtype=float).reshape(-1, k)
        T = self.base_level.size
        if not all(a.shape[0] == T for a in (self.base_index, self.q1, self.q2, self.c1, self.c2)):
            raise ShiftError("triple arrays have inconsistent lengths")
        if T and (self.base_level.max() + max(self.m, self.n) >= mesh.depth
                  or self.base_level.min() < 0):
            raise ShiftError("Haar functions need children inside the grid: "
                             f"base level + max(m, n) must be < L={mesh.depth}")
        if np.any(np.abs(self.c1) > 1 + 1e-12) or np.any(np.abs(self.c2) > 1 + 1e-12):
            raise ShiftError("Haar coefficients must lie in [-1, 1]")
        if T:
            if np.any(_ancestor_flat(mesh, self.base_level + self.n, self.q1, self.base_level)
                      != self.base_index):
                raise ShiftError("Q' is not a descendant of its base cube")
            if np.any(_ancestor_flat(mesh, self.base_level + self.m, self.q2, self.base_level)
                      != self.base_index):
                raise ShiftError("Q'' is not a descendant of its base cube")
        for arr in (self.base_level, self.base_index, self.q1, self.q2, self.c1, self.c2):
            arr.setflags(write=False)

    # -- bookkeeping --------------------------------------------------------
    @property
    def complexity(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def tau(self) -> int:
        return max(self.m, self.n) + 1

    @property
    def n_triples(self) -> int:
        return int(self.base_level.size)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.c1 >= 0) and np.all(self.c2 >= 0))

    @property
    def is_cancellative(self) -> bool:
        """Every input Haar function has mean zero."""
        return bool(np.all(np.abs(self.c1.sum(axis=1)) <= 1e-12))

    def triples(self):
        """Yield ``(Q, h_{Q'}, h_{Q''})`` with explicit cubes."""
        mesh = self.mesh
        for t in range(self.n_triples):
            b = int(self.base_level[t])
            yield (mesh.cube(b, int(self.base_index[t])),
                   HaarFunction(mesh.cube(b + self.n, int(self.q1[t])), tuple(self.c1[t])),
                   HaarFunction(mesh.cube(b + self.m, int(self.q2[t])), tuple(self.c2[t])))

    def __eq__(self, other):
        if not isinstance(other, HaarShift):
            return NotImplemented
        return (self.mesh == other.mesh and self.complexity == other.complexity
                and all(np.array_equal(a, b) for a, b in zip(self._arrays(), other._arrays())))

    __hash__ = None

    def _arrays(self):
        return (self.base_level, self.base_index, self.q1, self.c1, self.q2, self.c2)

    def __repr__(self):
        return (f"HaarShift(d={self.mesh.dim}, L={self.mesh.depth}, complexity={self.complexity}, "
                f"triples={self.n_triples})")

    # -- linear algebra -----------------------------------------------------
    def _haar_matrix(self, level_offset: int, q, c) -> sp.csr_matrix:
        mesh = self.mesh
        T = self.n_triples
        rows, cols, vals = [], [], []
        lev = self.base_level + level_offset
        ids = np.arange(T)
        for lv in np.unique(lev):
            sel = ids[lev == lv]
            ch = mesh.child_indices(int(lv), q[sel])                   # (t, 2^d)
            cells = mesh.blocks(np.arange(mesh.n_cells), int(lv) + 1)  # (n_children, m)
            cc = cells[ch]                                             # (t, 2^d, m)
            rows.append(np.broadcast_to(sel[:, None, None], cc.shape).ravel())
            cols.append(cc.ravel())
            vals.append(np.broadcast_to(c[sel][:, :, None], cc.shape).ravel())
        if not rows:
            return sp.csr_matrix((T, mesh.n_cells))
        G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(T, mesh.n_cells))
        G.eliminate_zeros()
        return G

    @cached_property
    def _ops(self):
        mesh = self.mesh
        G1 = self._haar_matrix(self.n, self.q1, self.c1) * mesh.cell_volume
        G2 = self._haar_matrix(self.m, self.q2, self.c2)
        inv_vol = np.exp2(mesh.dim * self.base_level.astype(float))
        return G1.tocsr(), G2.T.tocsr(), inv_vol

    def coefficients(self, f) -> np.ndarray:
        """``(f, h'_t) / |Q_t|`` for every triple (columns of ``f`` batched)."""
        G1, _, inv_vol = self._ops
        x = G1 @ np.asarray(f, dtype=float)
        return x * (inv_vol if x.ndim == 1 else inv_vol[:, None])

    def apply_values(self, f, triple_weights=None) -> np.ndarray:
        """``S f`` on raw cell arrays; ``f`` may be ``(N,)`` or ``(N, k)``."""
        alpha = self.coefficients(f)
        if triple_weights is not None:
            w = np.asarray(triple_weights, dtype=float)
            alpha = alpha * (w if alpha.ndim == 1 else w[:, None])
        return self._ops[1] @ alpha

    def apply(self, f) -> GridFunction:
        return GridFunction(self.mesh, self.apply_values(as_values(f)))

    def grouped_apply(self, f, labels, n_groups: int) -> sp.csc_matrix:
        """Columns ``g`` hold ``sum_{t: labels[t]=g} S_{Q_t} f``; ``labels < 0`` dropped."""
        alpha = self.coefficients(as_values(f))
        labels = np.asarray(labels)
        keep = labels >= 0
        W = sp.csr_matrix((alpha[keep], (np.flatnonzero(keep), labels[keep])),
                          shape=(self.n_triples, n_groups))
        return (self._ops[1] @ W).tocsc()

    def level_contributions(self, f) -> np.ndarray:
        """``(N, L+1)`` array: column ``j`` is the sum of ``S_Q f`` over base level ``j``."""
        M = self.grouped_apply(f, self.base_level, self.mesh.depth + 1)
        return np.asarray(M.todense())

    def linear_operator(self) -> LinearOperator:
        N = self.mesh.n_cells
        adj = self.adjoint()
        return LinearOperator((N, N), matvec=self.apply_values, rmatvec=adj.apply_values,
                              matmat=self.apply_values, dtype=float)

    def adjoint(self) -> "HaarShift":
        """Swap the roles of ``(Q', h')`` and ``(Q'', h'')``; complexity ``(n, m)``."""
        return HaarShift(self.mesh, self.n, self.m, self.base_level, self.base_index,
                         self.q2, self.c2, self.q1, self.c1)

    @cached_property
    def l2_norm(self) -> float:
        """Unweighted ``L^2(dx)`` operator norm on the grid."""
        one = self.mesh.constant(1.0)
        return weighted_norm_estimate(self, one, one, 2.0).estimate

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "format": "haar-shift",
            "mesh": {"d": self.mesh.dim, "L": self.mesh.depth},
            "complexity": [self.m, self.n],
            "triples": [
                {"base": [int(b), int(k)], "q1": int(a), "c1": [float(x) for x in c],
                 "q2": int(bq), "c2": [float(x) for x in e]}
                for b, k, a, c, bq, e in zip(*self._arrays())
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HaarShift":
        doc = json.loads(text)
        if doc.get("format") != "haar-shift":
            raise ShiftError("not a haar-shift document")
        mesh = DyadicMesh(doc["mesh"]["d"], doc["mesh"]["L"])
        m, n = doc["complexity"]
        tr = doc["triples"]
        k = 1 << mesh.dim
        return cls(mesh, m, n,
                   [t["base"][0] for t in tr], [t["base"][1] for t in tr],
                   [t["q1"] for t in tr], np.array([t["c1"] for t in tr], float).reshape(-1, k),
                   [t["q2"] for t in tr], np.array([t["c2"] for t in tr], float).reshape(-1, k))


def apply(S: HaarShift, f) -> GridFunction:
    return S.apply(f)


def adjoint(S: HaarShift) -> HaarShift:
    return S.adjoint()


# -- constructors -------------------------------------------------------------

def random_shift(mesh: DyadicMesh, m: int, n: int, seed: int, mode: str = "cancellative",
                 levels=None) -> HaarShift:
    """One random triple per admissible base cube.

    ``mode="cancellative"``: coefficients uniform in ``[-1, 1]``, projected to
    mean zero and rescaled into ``[-1, 1]``.  ``mode="positive"``: uniform in
    ``[0, 1]``.  Base levels default to every ``j`` with ``j + max(m, n) < L``.
    """
    if m < 0 or n < 0 or max(m, n) >= mesh.depth:
        raise ShiftError(f"complexity ({m}, {n}) does not fit a depth-{mesh.depth} grid")
    if mode not in ("cancellative", "positive"):
        raise ShiftError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    top = mesh.depth - max(m, n)
    levels = range(top) if levels is None else [j for j in levels if 0 <= j < top]
    k = 1 << mesh.dim
    bl, bi, q1, q2 = [], [], [], []
    for j in levels:
        idx = np.arange(mesh.n_cubes(j))
        bl.append(np.full(idx.size, j))
        bi.append(idx)
        q1.append(_random_descendant(mesh, j, idx, n, rng))
        q2.append(_random_descendant(mesh, j, idx, m, rng))
    T = int(sum(a.size for a in bl))
    if mode == "positive":
        c1 = rng.uniform(0.0, 1.0, (T, k))
        c2 = rng.uniform(0.0, 1.0, (T, k))
    else:
        c1 = _cancel(rng.uniform(-1.0, 1.0, (T, k)))
        c2 = _cancel(rng.uniform(-1.0, 1.0, (T, k)))
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64))
    return HaarShift(mesh, m, n, cat(bl), cat(bi), cat(q1), c1, cat(q2), c2)


def _cancel(c):
    c = c - c.mean(axis=1, keepdims=True)
    return c / np.maximum(1.0, np.abs(c).max(axis=1, keepdims=True))


def _random_descendant(mesh, level, index, depth, rng):
    which = rng.integers(0, 1 << (mesh.dim * depth), size=np.size(index))
    n = 1 << depth
    if mesh.dim == 1:
        return (np.asarray(index) << depth) + which
    N = 1 << level
    r, c = np.divmod(np.asarray(index), N)
    dr, dc = np.divmod(which, n)
    return ((r << depth) + dr) * (N << depth) + (c << depth) + dc


@dataclass
class SparseFamily:
    """Dyadic cubes, each owning the disjoint set ``E_Q`` of cells (``owner == k``)."""

    mesh: DyadicMesh
    levels: np.ndarray
    indices: np.ndarray
    owner: np.ndarray

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.owner = np.asarray(self.owner, dtype=np.int64)

    def __len__(self):
        return int(self.levels.size)

    @property
    def cubes(self) -> list[DyadicCube]:
        return [self.mesh.cube(int(j), int(k)) for j, k in zip(self.levels, self.indices)]

    def sparseness(self) -> float:
        """``min_k |E_k| / |Q_k|`` (at least 1/2 for a sparse family)."""
        if not len(self):
            return 1.0
        counts = np.bincount(self.owner[self.owner >= 0], minlength=len(self))
        sizes = np.array([self.mesh.cells_per_cube(int(j)) for j in self.levels])
        return float(np.min(counts / sizes))

    def validate(self):
        mesh = self.mesh
        anc = mesh.ancestor_index
        own = self.owner
        live = own >= 0
        if np.any(anc[self.levels[own[live]], np.flatnonzero(live)] != self.indices[own[live]]):
            raise ShiftError("E_Q leaves its cube")
        if self.sparseness() < 0.5:
            raise ShiftError("sparse family violates |E_Q| >= |Q|/2")
        return self


def random_sparse_family(mesh: DyadicMesh, seed: int, min_level: int = 0, max_step: int = 3,
                         fill: float = 0.5) -> SparseFamily:
    """Random sparse family: each cube picks disjoint descendants of total measure <= fill |Q|.

    Roots are all cubes of ``min_level``; every chosen cube has level < L so
    that its indicator is a Haar function.
    """
    if not 0 <= min_level < mesh.depth:
        raise ShiftError("min_level must lie in [0, L)")
    if not 0 < fill <= 0.5:
        raise ShiftError("fill must lie in (0, 1/2]")
    rng = np.random.default_rng(seed)
    levels, indices = [], []
    owner = np.full(mesh.n_cells, -1, dtype=np.int64)
    queue = [(min_level, k) for k in range(mesh.n_cubes(min_level))]
    anc = mesh.ancestor_index
    while queue:
        j, k = queue.pop()
        me = len(levels)
        levels.append(j)
        indices.append(k)
        owner[anc[j] == k] = me
        if j + 1 > mesh.depth - 1:
            continue
        lv = int(min(j + rng.integers(1, max_step + 1), mesh.depth - 1))
        nd = 1 << (mesh.dim * (lv - j))
        cap = int(np.floor(fill * nd))
        if cap < 1:
            continue
        count = int(rng.integers(0, cap + 1))
        picks = rng.choice(nd, size=count, replace=False)
        for w in np.sort(picks):
            queue.append((lv, int(mesh.descendant_index(j, k, lv - j, int(w)))))
    return SparseFamily(mesh, np.array(levels), np.array(indices), owner).validate()


def lerner_shift(family: SparseFamily, i: int) -> HaarShift:
    """``f -> sum_Q <f>_Q chi^i_Q`` with ``chi^i_Q = sum_{R in family, R^i = Q} chi_R``.

    Every ``R`` gives the triple ``(R^i, Q' = R^i, h' = chi_{R^i}, Q'' = R,
    h'' = chi_R)``, so the kernel has complexity ``(m, n) = (i, 0)`` and
    ``tau = i + 1``.
    """
    mesh = family.mesh
    if i < 0:
        raise ShiftError("i must be nonnegative")
    lv, ix = family.levels, family.indices
    if len(family) and lv.min() < i:
        raise ShiftError(f"family cube at level {int(lv.min())} has no {i}-th parent")
    if len(family) and lv.max() >= mesh.depth:
        raise ShiftError("family cubes must lie above the finest level")
    base_l = lv - i
    base_k = _ancestor_flat(mesh, lv, ix, base_l) if len(family) else ix
    ones = np.ones((len(family), 1 << mesh.dim))
    return HaarShift(mesh, i, 0, base_l, base_k, base_k, ones, ix, ones)


# -- estimators ---------------------------------------------------------------

def maximal_truncation(S: HaarShift, f) -> GridFunction:
    """``max`` over level windows ``[j1, j2]`` of ``|sum_{j1 <= level(Q) <= j2} S_Q f|``."""
    contrib = np.ascontiguousarray(S.level_contributions(f))
    return GridFunction(S.mesh, np.asarray(_backend.kernels.window_max_abs(contrib)))


@dataclass
class NormEstimate:
    lower_bound: float
    estimate: float
    exact: bool
    method: str
    iterations: int = 0
    extremizer: np.ndarray | None = None

    def as_dict(self):
        return {"lower_bound": self.lower_bound, "estimate": self.estimate, "exact": self.exact,
                "method": self.method, "iterations": self.iterations,
                "semantics": "exact" if self.exact else "lower bound"}


def _weighted_normal(S: HaarShift, u, sigma):
    su = np.sqrt(as_values(u))
    ss = np.sqrt(as_values(sigma))
    adj = S.adjoint()
    N = S.mesh.n_cells

    def mv(v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            return ss[:, None] * adj.apply_values((su ** 2)[:, None] * S.apply_values(ss[:, None] * v))
        return ss * adj.apply_values(su ** 2 * S.apply_values(ss * v))

    return LinearOperator((N, N), matvec=mv, matmat=mv, dtype=float), ss


def power_iteration(op: LinearOperator, seed: int = 0, max_iter: int = 200, rtol: float = 1e-10):
    """Largest eigenvalue of a positive semidefinite operator; returns ``(value, vector, iters)``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        y = op.matvec(x)
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, x, it
        x = y / ny
        if abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    return lam, x, it


def weighted_norm_estimate(S: HaarShift, u, sigma, p: float = 2.0, budget: int = 16,
                           seed: int = 0, method: str = "lanczos") -> NormEstimate:
    """Estimate ``sup ||S(f sigma)||_{L^p(u)} / ||f||_{L^p(sigma)}``.

    For ``p = 2`` the value is the top singular value of
    ``u^(1/2) S sigma^(1/2)``, computed by Lanczos (``method="lanczos"``) or by
    plain power iteration on the normal operator (``method="power"``).  For
    other ``p`` the best of ``budget`` candidates refined by Boyd's nonlinear
    power method is returned as a certified lower bound.
    """
    uv, sv = as_values(u), as_values(sigma)
    if np.any(uv <= 0) or np.any(sv <= 0):
        raise MeshError("weights must be positive")
    if budget < 1:
        raise ShiftError("budget must be >= 1")
    op, ss = _weighted_normal(S, uv, sv)
    N = S.mesh.n_cells
    if S.n_triples == 0:
        return NormEstimate(0.0, 0.0, True, "empty")
    if method == "power":
        lam, vec, its = power_iteration(op, seed)
        how = "power"
    elif N <= 64:
        dense = op.matmat(np.eye(N))
        w, V = np.linalg.eigh(0.5 * (dense + dense.T))
        lam, vec, its = float(w[-1]), V[:, -1], 1
        how = "dense"
    else:
        v0 = np.random.default_rng(seed).standard_normal(N)
        w, V = eigsh(op, k=1, which="LA", tol=1e-13, v0=v0, maxiter=20 * N)
        lam, vec, its = float(w[0]), V[:, 0], 0
        how = "lanczos"
    norm2 = float(np.sqrt(max(lam, 0.0)))
    f2 = vec / ss
    if p == 2:
        return NormEstimate(norm2, norm2, how != "power", how, its, f2)
    return _lp_lower_bound(S, uv, sv, p, budget, seed, f2)


def _ratio(S, u, sigma, p, f, vol):
    num = np.sum(np.abs(S.apply_values(f * sigma)) ** p * u) * vol
    den = np.sum(np.abs(f) ** p * sigma) * vol
    return (num / den) ** (1 / p) if den > 0 else 0.0


def _lp_lower_bound(S, u, sigma, p, budget, seed, f2):
    mesh = S.mesh
    vol = mesh.cell_volume
    rng = np.random.default_rng(seed)
    q = conjugate_exponent(p)
    adj = S.adjoint()
    cands = [f2, np.ones(mesh.n_cells)]
    for j in range(min(mesh.depth, 4) + 1):
        for k in range(mesh.n_cubes(j)):
            cands.append((mesh.ancestor_index[j] == k).astype(float))
    while len(cands) < budget + 2:
        cands.append(rng.choice([-1.0, 1.0], mesh.n_cells))
    cands = cands[: max(budget, 2)]
    scored = sorted(((_ratio(S, u, sigma, p, f, vol), i) for i, f in enumerate(cands)),
                    reverse=True)
    best = scored[0][0]
    best_f = cands[scored[0][1]]
    iters = 0
    # Boyd iteration from the best few candidates: f <- Psi_q(S^*(u Psi_p(S(f sigma))))
    for _, i in scored[:3]:
        f = cands[i]
        for _ in range(50):
            g = S.apply_values(f * sigma)
            h = adj.apply_values(u * np.sign(g) * np.abs(g) ** (p - 1))
            nf = np.sign(h) * np.abs(h) ** (q - 1)
            if not np.any(nf):
                break
            f = nf / np.max(np.abs(nf))
            r = _ratio(S, u, sigma, p, f, vol)
            iters += 1
            if r > best * (1 + 1e-12):
                best, best_f = r, f
            else:
                break
    return NormEstimate(float(best), float(best), False, "candidates+boyd", iters, best_f)


def _restricted_images(S: HaarShift, sigma_vals, level: int) -> np.ndarray:
    """``z(x) = S(chi_{Q(x)} sigma)(x)`` with ``Q(x)`` the level-``level`` cube of ``x``."""
    mesh = S.mesh
    G1, G2T, inv_vol = S._ops
    anc = mesh.ancestor_index[level]
    nq = mesh.n_cubes(level)
    X = sp.csr_matrix((sigma_vals, (np.arange(mesh.n_cells), anc)), shape=(mesh.n_cells, nq))
    A = sp.diags(inv_vol) @ (G1 @ X)                       # (T, nq)
    A = A.tocsr()
    A.sort_indices()
    coo = G2T.tocoo()                                      # entries (x, t)
    keys_A = np.repeat(np.arange(A.shape[0], dtype=np.int64), np.diff(A.indptr)) * nq + A.indices
    keys = coo.col.astype(np.int64) * nq + anc[coo.row]
    pos = np.searchsorted(keys_A, keys)
    pos = np.minimum(pos, max(keys_A.size - 1, 0))
    hit = keys_A.size > 0
    vals = np.where(hit & (keys_A[pos] == keys), A.data[pos] if hit else 0.0, 0.0) * coo.data
    return np.bincount(coo.row, weights=vals, minlength=mesh.n_cells)


def testing_constant(S: HaarShift, u, sigma, p: float = 2.0, argmax: bool = False):
    """``max_Q ||chi_Q S(chi_Q sigma)||_{L^p(u)} / sigma(Q)^(1/p)`` over every dyadic cube."""
    mesh = S.mesh
    uv, sv = as_values(u), as_values(sigma)
    if np.any(uv <= 0) or np.any(sv <= 0):
        raise MeshError("weights must be positive")
    vol = mesh.cell_volume
    best, where = 0.0, mesh.root()
    for j in range(mesh.depth + 1):
        z = _restricted_images(S, sv, j)
        num = mesh.level_sums(np.abs(z) ** p * uv, j) * vol
        den = mesh.level_sums(sv, j) * vol
        r = (num / den) ** (1 / p)
        k = int(np.argmax(r))
        if r[k] > best:
            best, where = float(r[k]), mesh.cube(j, k)
    return (best, where) if argmax else best


def dual_testing_constant(S: HaarShift, u, sigma, p: float = 2.0, argmax: bool = False):
    """``max_Q ||chi_Q S^*(chi_Q u)||_{L^p(sigma)} / u(Q)^(1/p)``."""
    return testing_constant(S.adjoint(), sigma, u, p, argmax)


def localization_split(S: HaarShift, sigma, Q0: DyadicCube, rtol: float = 1e-12) -> dict:
    """Split ``chi_Q0 S(chi_Q0 sigma)`` into base cubes inside ``Q0`` plus a tail.

    Returns the inside sum and verifies, cell by cell,
    ``chi_Q0 S(chi_Q0 sigma) <= sum_{R in Q0} S_R sigma + chi_Q0 <sigma>_Q0``.
    """
    if not S.is_positive:
        raise ShiftError("localization_split applies to positive shifts only")
    mesh = S.mesh
    sv = as_values(sigma)
    chi = np.zeros(mesh.n_cells)
    chi[mesh.cells_of(Q0)] = 1.0
    lhs = chi * S.apply_values(chi * sv)
    inside_mask = S.base_level >= Q0.level
    inside_mask &= np.where(inside_mask,
                            _ancestor_flat(mesh, np.maximum(S.base_level, Q0.level), S.base_index,
                                           Q0.level) == mesh.flat_index(Q0), False)
    inside = S.apply_values(sv, inside_mask.astype(float))
    avg = float(np.mean(sv[chi > 0]))
    rhs = inside + chi * avg
    slack = rhs - lhs
    return {
        "inside": GridFunction(mesh, inside),
        "lhs": GridFunction(mesh, lhs),
        "tail": avg,
        "min_slack": float(slack.min()),
        "passed": bool(np.all(slack >= -rtol * np.maximum(1.0, np.abs(rhs)))),
    }
