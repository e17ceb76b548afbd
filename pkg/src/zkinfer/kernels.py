"""Kernel selection: compiled Cython core when importable, else pure Python.

Set ``ZKINFER_PURE_PYTHON=1`` to force the fallback. The compiled kernels
only handle primes below 2**63; larger primes always use the fallback.
"""

import os

from . import _pykernels

try:
    if os.environ.get("ZKINFER_PURE_PYTHON"):
        raise ImportError("pure Python kernels requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"

_COMPILED_LIMIT = 1 << 63


def get(name: str = None):
    """Return the kernel module to use (``"cython"``, ``"python"`` or auto)."""
    if name == "python" or (name is None and _ckernels is None):
        return _pykernels
    if _ckernels is None:
        raise RuntimeError("compiled kernels are not built")
    return _ckernels


def for_prime(p: int, name: str = None):
    if p >= _COMPILED_LIMIT:
        return _pykernels
    return get(name)
