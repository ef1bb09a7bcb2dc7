"""Hot-loop kernel dispatch.

The compiled ``_core`` extension is used when it imports; otherwise the
numpy twins in ``_fallback`` are used. Set ``DRLCOV_PURE_PYTHON=1`` to force
the fallback (useful for benchmarking and for checking the two agree).
"""
import os
from types import ModuleType

from . import _fallback

BACKEND = "python"
_impl: ModuleType = _fallback

if os.environ.get("DRLCOV_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

conditional_affinities = _impl.conditional_affinities
tsne_gradient = _impl.tsne_gradient
cartpole_step = _impl.cartpole_step
vote_flat = _impl.vote_flat


def get_backend(name: str) -> ModuleType:
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return names
    return ["cython", *names]
