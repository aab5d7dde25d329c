"""Kernel backend selection.

The compiled ``_ckernels`` module is used when importable; set
``DSMCPAR_BACKEND=python`` to force the numpy fallback.  Both expose the
same four functions: ``index_cells``, ``move``, ``collide`` and ``sample``.
"""

import os
from types import ModuleType

from . import _pykernels

_ckernels: ModuleType | None
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name: str | None = None) -> ModuleType:
    """Backend module by name; ``None`` picks the default."""
    if name is None:
        name = os.environ.get("DSMCPAR_BACKEND", "").strip().lower() or None
    if name is None:
        return _ckernels if _ckernels is not None else _pykernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None


default = get_backend()
