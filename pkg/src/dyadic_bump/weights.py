"""Weight generators addressed by short spec strings.

``const:c``, ``power:alpha``, ``cascade:eta,seed``, ``spike:cell,mass`` and
``file:path``.  Every generator returns a strictly positive
:class:`GridFunction`.
"""
from __future__ import annotations

import numpy as np

from .mesh import DyadicMesh, GridFunction, MeshError, read_grid_function

__all__ = ["WeightError", "generate_weight", "const", "power_weight", "cascade", "spike",
           "GENERATORS"]


class WeightError(ValueError):
    """Invalid weight spec."""


def const(mesh: DyadicMesh, c: float = 1.0) -> GridFunction:
    if not c > 0:
        raise WeightError(f"const weight needs c > 0, got {c}")
    return GridFunction(mesh, np.full(mesh.n_cells, float(c)))


def power_weight(mesh: DyadicMesh, alpha: float) -> GridFunction:
    """``|x - center|^alpha`` at cell centers; the distance is at least half a cell."""
    if alpha <= -mesh.dim:
        raise WeightError(f"|x|^{alpha} is not locally integrable in dimension {mesh.dim}")
    x = mesh.cell_centers().reshape(mesh.n_cells, -1)
    r = np.linalg.norm(x - 0.5, axis=1)
    r = np.maximum(r, 0.5 / mesh.side_cells)
    return GridFunction(mesh, r ** alpha)


def cascade(mesh: DyadicMesh, eta: float, seed: int) -> GridFunction:
    """Multiplicative dyadic martingale with factors uniform in ``[1-eta, 1+eta]``.

    Children factors come in antithetic pairs ``1 + eta r``, ``1 - eta r``, so
    every cube average equals its parent's exactly and the weight at depth
    ``L'`` is the level-``L'`` average of the weight at any larger depth.
    """
    if not 0 <= eta < 1:
        raise WeightError(f"cascade needs 0 <= eta < 1, got {eta}")
    rng = np.random.default_rng(seed)
    k = 1 << mesh.dim
    w = np.ones(1)
    for j in range(mesh.depth):
        r = rng.uniform(-1.0, 1.0, (w.size, k // 2))
        fac = np.concatenate([1 + eta * r, 1 - eta * r], axis=1)
        if k > 2:
            fac = rng.permuted(fac, axis=1)
        child = w[:, None] * fac
        if mesh.dim == 1:
            w = child.reshape(-1)
        else:
            n = 1 << j
            w = child.reshape(n, n, 2, 2).transpose(0, 2, 1, 3).reshape(-1)
    return GridFunction(mesh, w)


def spike(mesh: DyadicMesh, cell: int, mass: float) -> GridFunction:
    """Ones everywhere except cell ``cell``, which carries total mass ``mass``."""
    if not 0 <= cell < mesh.n_cells:
        raise WeightError(f"cell {cell} outside 0..{mesh.n_cells - 1}")
    if not mass > 0:
        raise WeightError("spike mass must be positive")
    w = np.ones(mesh.n_cells)
    w[cell] = mass / mesh.cell_volume
    return GridFunction(mesh, w)


GENERATORS = {"const": const, "power": power_weight, "cascade": cascade, "spike": spike}


def generate_weight(spec: str, mesh: DyadicMesh) -> GridFunction:
    """Build a weight from ``name:args``."""
    name, _, args = str(spec).partition(":")
    name = name.strip()
    try:
        if name == "file":
            w = read_grid_function(args.strip())
            if w.mesh != mesh:
                raise WeightError(f"{args}: grid {w.mesh!r} does not match {mesh!r}")
            return w.require_positive("weight")
        parts = [a.strip() for a in args.split(",")] if args.strip() else []
        if name == "const":
            return const(mesh, float(parts[0]) if parts else 1.0)
        if name == "power":
            (alpha,) = parts
            return power_weight(mesh, float(alpha))
        if name == "cascade":
            eta, seed = parts
            return cascade(mesh, float(eta), int(seed))
        if name == "spike":
            cell, mass = parts
            return spike(mesh, int(cell), float(mass))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (WeightError, MeshError)):
            raise
        raise WeightError(f"malformed weight spec {spec!r}: {exc}") from exc
    raise WeightError(f"unknown weight generator {name!r}; expected one of "
                      f"{sorted(GENERATORS) + ['file']}")
