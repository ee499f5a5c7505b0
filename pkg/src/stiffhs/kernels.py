"""Kernel backend selection.

The compiled extension ``stiffhs._kernels`` is used when it imports; otherwise
the numpy implementation takes over.  Set ``STIFFHS_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
step_1d = _kernels_py.step_1d
step_2d = _kernels_py.step_2d

if os.environ.get("STIFFHS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        step_1d = _compiled.step_1d
        step_2d = _compiled.step_2d


def backends():
    """Available kernel modules keyed by name (for benchmarks and tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
