"""Finite dyadic geometry on the unit cube.

The ambient space is ``[0, 1)^d`` (``d`` in {1, 2}) cut into ``2^(d L)``
congruent cells.  Every dyadic cube at levels ``0..L`` is a union of cells,
so integrals of piecewise-constant functions are finite sums.

Cells are stored in lexicographic (row-major) order of their integer
coordinates.  Cubes are enumerated level-major, then lexicographically by
corner.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "MeshError",
    "DyadicCube",
    "DyadicMesh",
    "GridFunction",
    "children",
    "parent_i",
    "average",
    "weighted_measure",
    "read_grid_function",
    "write_grid_function",
]


class MeshError(ValueError):
    """Raised for out-of-grid requests and malformed grid data."""


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Dyadic cube ``prod_k [c_k 2^-j, (c_k + 1) 2^-j)``."""

    level: int
    corner: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise MeshError(f"negative level {self.level}")
        n = 1 << self.level
        if any(c < 0 or c >= n for c in self.corner):
            raise MeshError(f"corner {self.corner} outside level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.level * self.dim)

    def contains(self, other: "DyadicCube") -> bool:
        """True if ``other`` is a (non-strict) subcube of this cube."""
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((o >> shift) == c for o, c in zip(other.corner, self.corner))

    def ancestor(self, i: int) -> "DyadicCube":
        if i < 0 or i > self.level:
            raise MeshError(f"no {i}-th parent of a level-{self.level} cube")
        return DyadicCube(self.level - i, tuple(c >> i for c in self.corner))

    def interval(self) -> list[tuple[Fraction, Fraction]]:
        n = 1 << self.level
        return [(Fraction(c, n), Fraction(c + 1, n)) for c in self.corner]

    def __str__(self) -> str:
        parts = [f"[{a},{b})" for a, b in self.interval()]
        return "x".join(parts)


class DyadicMesh:
    """Dyadic partition of ``[0,1)^d`` at depth ``L``.

    Parameters
    ----------
    dim : int
        Ambient dimension, 1 or 2.
    depth : int
        Finest level ``L``; the mesh has ``2**(dim*depth)`` cells.
    """

    MAX_CELLS = 1 << 24

    def __init__(self, dim: int = 1, depth: int = 8):
        if dim not in (1, 2):
            raise MeshError(f"dimension must be 1 or 2, got {dim}")
        if depth < 1:
            raise MeshError(f"depth must be positive, got {depth}")
        if 1 << (dim * depth) > self.MAX_CELLS:
            raise MeshError(f"mesh 2^({dim}*{depth}) cells is too large")
        self.dim = dim
        self.depth = depth

    def __repr__(self):
        return f"DyadicMesh(dim={self.dim}, depth={self.depth})"

    def __eq__(self, other):
        return (isinstance(other, DyadicMesh) and self.dim == other.dim
                and self.depth == other.depth)

    def __hash__(self):
        return hash((self.dim, self.depth))

    @property
    def n_cells(self) -> int:
        return 1 << (self.dim * self.depth)

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.dim * self.depth)

    @property
    def side_cells(self) -> int:
        return 1 << self.depth

    def n_cubes(self, level: int) -> int:
        return 1 << (self.dim * level)

    @cached_property
    def level_offsets(self) -> np.ndarray:
        """Offset of each level in the level-major enumeration of all cubes."""
        counts = [self.n_cubes(j) for j in range(self.depth + 1)]
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def total_cubes(self) -> int:
        return int(self.level_offsets[-1])

    # -- cube bookkeeping ------------------------------------------------
    def root(self) -> DyadicCube:
        return DyadicCube(0, (0,) * self.dim)

    def _check(self, Q: DyadicCube):
        if Q.dim != self.dim or Q.level > self.depth:
            raise MeshError(f"cube {Q} is not in {self!r}")

    def flat_index(self, Q: DyadicCube) -> int:
        """Index of ``Q`` among the cubes of its level (row-major)."""
        self._check(Q)
        k = 0
        for c in Q.corner:
            k = (k << Q.level) | c
        return k

    def cube(self, level: int, index: int) -> DyadicCube:
        n = 1 << level
        if level > self.depth or not 0 <= index < self.n_cubes(level):
            raise MeshError(f"no cube {index} at level {level}")
        corner = []
        for _ in range(self.dim):
            corner.append(index % n)
            index //= n
        return DyadicCube(level, tuple(reversed(corner)))

    def global_index(self, Q: DyadicCube) -> int:
        return int(self.level_offsets[Q.level]) + self.flat_index(Q)

    def cubes(self, level: int | None = None) -> Iterator[DyadicCube]:
        """All cubes, level-major then lexicographic; or those of one level."""
        levels = range(self.depth + 1) if level is None else [level]
        for j in levels:
            for k in range(self.n_cubes(j)):
                yield self.cube(j, k)

    def children(self, Q: DyadicCube) -> list[DyadicCube]:
        self._check(Q)
        if Q.level >= self.depth:
            raise MeshError(f"cube {Q} is at the finest level and has no children")
        out = []
        for bits in range(1 << self.dim):
            corner = tuple(2 * c + ((bits >> (self.dim - 1 - k)) & 1)
                           for k, c in enumerate(Q.corner))
            out.append(DyadicCube(Q.level + 1, corner))
        return out

    def parent_i(self, Q: DyadicCube, i: int) -> DyadicCube:
        self._check(Q)
        return Q.ancestor(i)

    # -- cell/cube index maps ----------------------------------------------
    @cached_property
    def _cell_coords(self) -> np.ndarray:
        n = self.side_cells
        idx = np.arange(self.n_cells, dtype=np.int64)
        if self.dim == 1:
            return idx[:, None]
        return np.stack([idx // n, idx % n], axis=1)

    @cached_property
    def ancestor_index(self) -> np.ndarray:
        """``(L+1, N)`` array: flat index of each cell's level-j ancestor."""
        coords = self._cell_coords
        out = np.empty((self.depth + 1, self.n_cells), dtype=np.int64)
        for j in range(self.depth + 1):
            shift = self.depth - j
            a = coords >> shift
            if self.dim == 1:
                out[j] = a[:, 0]
            else:
                out[j] = (a[:, 0] << j) | a[:, 1]
        return out

    @cached_property
    def _block_perm(self) -> list[np.ndarray]:
        return [np.argsort(self.ancestor_index[j], kind="stable")
                for j in range(self.depth + 1)]

    def cells_per_cube(self, level: int) -> int:
        return 1 << (self.dim * (self.depth - level))

    def cells_of(self, Q: DyadicCube) -> np.ndarray:
        """Indices of the finest cells inside ``Q`` (sorted)."""
        k = self.flat_index(Q)
        m = self.cells_per_cube(Q.level)
        return np.sort(self._block_perm[Q.level][k * m:(k + 1) * m])

    def blocks(self, x: np.ndarray, level: int) -> np.ndarray:
        """Group cell values by level-``level`` cube: shape ``(n_cubes, cells_per_cube)``."""
        x = np.asarray(x)
        m = self.cells_per_cube(level)
        if self.dim == 1:
            return x.reshape(self.n_cubes(level), m, *x.shape[1:])
        return x[self._block_perm[level]].reshape(self.n_cubes(level), m, *x.shape[1:])

    def level_sums(self, x: np.ndarray, level: int) -> np.ndarray:
        """Sum of cell values over each cube of ``level`` (leading axis = cells)."""
        x = np.asarray(x)
        s = 1 << (self.depth - level)
        n = 1 << level
        if self.dim == 1:
            return x.reshape(n, s, *x.shape[1:]).sum(axis=1)
        g = x.reshape(n, s, n, s, *x.shape[1:]).sum(axis=(1, 3))
        return g.reshape(n * n, *x.shape[1:])

    def level_means(self, x: np.ndarray, level: int) -> np.ndarray:
        return self.level_sums(x, level) / self.cells_per_cube(level)

    def pyramid_means(self, x: np.ndarray) -> list[np.ndarray]:
        """Cube averages at every level, computed bottom-up."""
        x = np.asarray(x, dtype=float)
        out = [None] * (self.depth + 1)
        out[self.depth] = x
        cur = x
        for j in range(self.depth - 1, -1, -1):
            cur = self._coarsen_means(cur, j)
            out[j] = cur
        return out

    def _coarsen_means(self, arr: np.ndarray, level: int) -> np.ndarray:
        """Averages at ``level`` from averages at ``level + 1``."""
        n = 1 << level
        if self.dim == 1:
            return arr.reshape(n, 2, *arr.shape[1:]).mean(axis=1)
        g = arr.reshape(n, 2, n, 2, *arr.shape[1:]).mean(axis=(1, 3))
        return g.reshape(n * n, *arr.shape[1:])

    def children_view(self, arr_next: np.ndarray, level: int) -> np.ndarray:
        """Reshape level ``level+1`` data to ``(n_cubes(level), 2^d, ...)``."""
        n = 1 << level
        if self.dim == 1:
            return arr_next.reshape(n, 2, *arr_next.shape[1:])
        g = arr_next.reshape(n, 2, n, 2, *arr_next.shape[1:])
        g = np.moveaxis(g, 2, 1)
        return g.reshape(n * n, 4, *arr_next.shape[1:])

    def child_indices(self, level: int, index: np.ndarray) -> np.ndarray:
        """Flat indices at ``level+1`` of the children of cubes ``index`` at ``level``."""
        index = np.asarray(index, dtype=np.int64)
        if self.dim == 1:
            return 2 * index[..., None] + np.arange(2)
        n = 1 << level
        r, c = index // n, index % n
        dr = np.array([0, 0, 1, 1])
        dc = np.array([0, 1, 0, 1])
        return (2 * r[..., None] + dr) * (2 * n) + (2 * c[..., None] + dc)

    def descendant_index(self, level: int, index: int, depth: int, which: int) -> int:
        """Flat index of descendant ``which`` (row-major) ``depth`` levels below."""
        n = 1 << depth
        if self.dim == 1:
            return (index << depth) + which
        N = 1 << level
        r, c = divmod(index, N)
        dr, dc = divmod(which, n)
        return ((r << depth) + dr) * (N << depth) + (c << depth) + dc

    def upsample(self, arr: np.ndarray, level: int) -> np.ndarray:
        """Cell values equal to the value of each cell's level-``level`` ancestor."""
        return np.asarray(arr)[self.ancestor_index[level]]

    def cell_centers(self) -> np.ndarray:
        h = 1.0 / self.side_cells
        return (self._cell_coords + 0.5) * h

    def indicator(self, Q: DyadicCube) -> "GridFunction":
        v = np.zeros(self.n_cells)
        v[self.cells_of(Q)] = 1.0
        return GridFunction(self, v)

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.n_cells, float(c)))


class GridFunction:
    """Piecewise-constant function on the finest cells of a mesh.

    ``values`` is a read-only float array of length ``mesh.n_cells`` in
    lexicographic cell order.
    """

    __array_priority__ = 100

    def __init__(self, mesh: DyadicMesh, values):
        v = np.array(values, dtype=float).reshape(-1)
        if v.shape[0] != mesh.n_cells:
            raise MeshError(f"expected {mesh.n_cells} values, got {v.shape[0]}")
        v.setflags(write=False)
        self.mesh = mesh
        self.values = v

    def __repr__(self):
        return f"GridFunction({self.mesh!r}, n={self.values.size})"

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _wrap(self, other, op):
        if isinstance(other, GridFunction):
            if other.mesh != self.mesh:
                raise MeshError("grid functions live on different meshes")
            other = other.values
        return GridFunction(self.mesh, op(self.values, other))

    def __add__(self, o): return self._wrap(o, np.add)
    def __radd__(self, o): return self._wrap(o, np.add)
    def __sub__(self, o): return self._wrap(o, np.subtract)
    def __rsub__(self, o): return self._wrap(o, lambda a, b: b - a)
    def __mul__(self, o): return self._wrap(o, np.multiply)
    def __rmul__(self, o): return self._wrap(o, np.multiply)
    def __truediv__(self, o): return self._wrap(o, np.divide)
    def __pow__(self, o): return self._wrap(o, np.power)
    def __neg__(self): return GridFunction(self.mesh, -self.values)
    def __abs__(self): return GridFunction(self.mesh, np.abs(self.values))

    def integral(self) -> float:
        return float(self.values.sum() * self.mesh.cell_volume)

    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0) and np.all(np.isfinite(self.values)))

    def require_positive(self, name: str = "weight") -> "GridFunction":
        if not self.is_positive():
            raise MeshError(f"{name} must be strictly positive and finite on every cell")
        return self

    def restrict(self, Q: DyadicCube) -> np.ndarray:
        return self.values[self.mesh.cells_of(Q)]


def children(mesh: DyadicMesh, Q: DyadicCube) -> list[DyadicCube]:
    return mesh.children(Q)


def parent_i(mesh: DyadicMesh, Q: DyadicCube, i: int) -> DyadicCube:
    return mesh.parent_i(Q, i)


def average(f: GridFunction, Q: DyadicCube) -> float:
    """Exact mean of ``f`` over ``Q``."""
    return float(f.restrict(Q).mean())


def weighted_measure(w: GridFunction, Q: DyadicCube) -> float:
    """``w(Q)``, the integral of a positive weight over ``Q``."""
    vals = w.restrict(Q)
    if not np.all(vals > 0):
        raise MeshError("weighted_measure needs a strictly positive weight")
    return float(vals.mean() * Q.volume)


HEADER_PREFIX = "dyadic-grid"


def write_grid_function(f: GridFunction, path: str | Path) -> None:
    lines = [f"{HEADER_PREFIX} d={f.mesh.dim} L={f.mesh.depth}"]
    lines += [repr(float(v)) for v in f.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_function(path: str | Path) -> GridFunction:
    text = Path(path).read_text().split("\n")
    header = text[0].split()
    if len(header) != 3 or header[0] != HEADER_PREFIX:
        raise MeshError(f"{path}: bad header {text[0]!r}")
    try:
        fields = dict(tok.split("=", 1) for tok in header[1:])
        d, L = int(fields["d"]), int(fields["L"])
    except (KeyError, ValueError) as exc:
        raise MeshError(f"{path}: bad header {text[0]!r}") from exc
    mesh = DyadicMesh(d, L)
    vals = [ln.strip() for ln in text[1:] if ln.strip()]
    if len(vals) != mesh.n_cells:
        raise MeshError(f"{path}: header promises {mesh.n_cells} values, found {len(vals)}")
    return GridFunction(mesh, [float(v) for v in vals])


def as_values(f: GridFunction | Sequence[float] | np.ndarray) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
