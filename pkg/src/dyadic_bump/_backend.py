"""Kernel backend selection.

The compiled extension ``_core`` is used when it imports; otherwise (or when
``DYADIC_BUMP_PURE_PYTHON=1``) the numpy versions in ``_fallback`` are used.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("DYADIC_BUMP_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _core as kernels  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        pass


def available():
    """Names of importable backends."""
    names = ["python"]
    try:
        from . import _core  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names


def get(name=None):
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")


def threads() -> int:
    """Parallelism cap from ``DYADIC_BUMP_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DYADIC_BUMP_THREADS", "1")))
    except ValueError:
        return 1
