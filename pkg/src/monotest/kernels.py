"""Kernel dispatch: the compiled extension when it imports, else pure Python.

Set MONOTEST_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("MONOTEST_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

interval_collisions = _impl.interval_collisions
fixup_weights = _impl.fixup_weights
