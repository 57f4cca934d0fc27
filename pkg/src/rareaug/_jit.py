"""Numba toggle shared by every hot kernel.

Each accelerated kernel exists twice: an ``@njit`` loop version and a
vectorised numpy version. ``NUMBA_ENABLED`` picks which one the public
functions dispatch to. Set ``RAREAUG_DISABLE_NUMBA=1`` to force the numpy
path (useful for debugging and for the equivalence tests).
"""

import os

try:
    import numba

    _numba_importable = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    _numba_importable = False

_disabled = os.environ.get("RAREAUG_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

NUMBA_ENABLED = _numba_importable and not _disabled


def njit(func=None, **kwargs):
    """``numba.njit`` with cache/nogil on, or a no-op when numba is absent.

    Kernels decorated here are always compiled when numba imports, even if
    ``NUMBA_ENABLED`` is false, so the benchmark can compare both paths.
    """
    if not _numba_importable:
        return func if func is not None else (lambda f: f)
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)
    decorator = numba.njit(**opts)
    return decorator(func) if func is not None else decorator


def pick(nb_impl, np_impl):
    """Return the implementation selected by the environment flag."""
    return nb_impl if NUMBA_ENABLED else np_impl
