"""Backend selection for the accumulation kernels.

The compiled extension is used when it was built; ``ERGODIFF_PURE=1`` forces
the numpy fallback.  Both expose ``char_accumulate``, ``value_accumulate``,
``set_num_threads`` and ``NAME``.
"""
import os

from . import _fallback

fallback = _fallback

if os.environ.get("ERGODIFF_PURE", "") not in ("", "0"):
    backend = _fallback
else:
    try:
        from . import _core as backend
    except ImportError:  # extension not built
        backend = _fallback

BACKEND = backend.NAME


def set_num_threads(n):
    return backend.set_num_threads(int(n))


def get_backend(name=None):
    """Return the module for ``name`` ('cython' or 'python'); default active."""
    if name is None:
        return backend
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
