"""Backend selection for the hot kernels.

The compiled extension ``psi_lab._kernels`` is used when importable. Set
``PSI_LAB_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("PSI_LAB_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
philox4x64 = _impl.philox4x64
binomial_counts = _impl.binomial_counts
fringe_normal_equations = _impl.fringe_normal_equations


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
