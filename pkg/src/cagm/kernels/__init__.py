"""Hot loops behind a backend switch.

Every kernel exists twice: a numba ``@njit`` version in :mod:`._numba` and a
vectorised numpy version in :mod:`._numpy`. Both consume the same pre-drawn
uniform stream, so for identical inputs they return identical outputs.

The backend is chosen at import time. Set ``CAGM_DISABLE_NUMBA=1`` to force the
numpy path; numba is also skipped when it cannot be imported.
"""

import os

from . import _numpy

try:
    from . import _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("CAGM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


_BACKEND = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def backend():
    return _BACKEND


def set_backend(name):
    """Switch backend at runtime; returns the previous name."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    previous, _BACKEND = _BACKEND, name
    return previous


def module(name=None):
    name = name or _BACKEND
    return _numba if name == "numba" else _numpy


def triangle_census(indptr, indices, membership, n_comm):
    return module().triangle_census(indptr, indices, membership, n_comm)


def draw_edges(*args):
    return module().draw_edges(*args)


def enforce_intra(*args):
    return module().enforce_intra(*args)


def enforce_inter(*args):
    return module().enforce_inter(*args)


def louvain_move(*args):
    return module().louvain_move(*args)


# uniforms consumed per proposal by the sampling kernels
DRAW_STRIDE = 4
