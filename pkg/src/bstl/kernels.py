"""Backend selection for the hot loops.

The compiled module is used when it imports cleanly, unless the
``BSTL_PURE_PYTHON`` environment variable is set to a non-empty value.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.environ.get("BSTL_PURE_PYTHON") or _ckernels is None:
    _impl = _pykernels
else:
    _impl = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def backend():
    """Name of the active backend."""
    return "cython" if _impl is _ckernels and _ckernels is not None else "python"


def set_backend(name):
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}")
    _impl = _BACKENDS[name]


def block_energies(z, block_dims):
    """Per-block sums of squares of an n-way array, indexed by block tuple."""
    return _impl.block_energies(z, tuple(int(b) for b in block_dims))


def max_abs_inner(d, block_len=1, within=False):
    """Largest absolute inner product between distinct columns of ``d``."""
    return float(_impl.max_abs_inner(d, int(block_len), bool(within)))
