"""Backend selection for the sequential estimator kernels.

Two interchangeable implementations exist: a compiled Cython module
(``scsm._backend._kernels``) and a pure-NumPy fallback
(``scsm._backend._pykernels``).  Which one is active is decided once at
import time from the ``SCSM_BACKEND`` environment variable:

* ``auto`` (default) -- use the compiled kernels when importable, fall
  back to NumPy silently otherwise;
* ``compiled`` -- require the compiled kernels, raising ``ImportError``
  if the extension is missing;
* ``python`` -- force the NumPy fallback.

Both expose the same two callables, ``recursive_fit`` and
``influence_base``; see ``_pykernels`` for the documented contracts.
"""

import os

from . import _pykernels

try:
    from . import _kernels

    HAS_COMPILED = True
except ImportError:
    _kernels = None
    HAS_COMPILED = False

_choice = os.environ.get("SCSM_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(
        f"SCSM_BACKEND must be 'auto', 'compiled' or 'python', got {_choice!r}"
    )
if _choice == "compiled" and not HAS_COMPILED:
    raise ImportError(
        "SCSM_BACKEND=compiled but the compiled kernels are not available; "
        "reinstall with a C compiler and Cython, or set SCSM_BACKEND=python"
    )

if _choice in ("auto", "compiled") and HAS_COMPILED:
    BACKEND = "compiled"
    _impl = _kernels
else:
    BACKEND = "python"
    _impl = _pykernels

recursive_fit = _impl.recursive_fit
influence_base = _impl.influence_base


def get_backend(name):
    """Return the kernel module for ``name`` ('compiled' or 'python').

    Used by the benchmark and the backend-equivalence tests; raises
    ``ImportError`` when the compiled module was not built.
    """
    if name == "python":
        return _pykernels
    if name == "compiled":
        if not HAS_COMPILED:
            raise ImportError("compiled kernels are not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "BACKEND",
    "HAS_COMPILED",
    "get_backend",
    "influence_base",
    "recursive_fit",
]
