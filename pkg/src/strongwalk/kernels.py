"""Kernel backend selection.

Imports the compiled kernels when the extension built, otherwise the numpy
fallbacks. ``STRONGWALK_PURE_PYTHON=1`` in the environment forces the
fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("STRONGWALK_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _fastkern as _impl
    except ImportError:
        _impl = _kernels_py

twist_scan = _impl.twist_scan
lattice_step_back = _impl.lattice_step_back
sup_diff_nested = _impl.sup_diff_nested


def backend_name():
    """'compiled' when the C extension is active, else 'numpy'."""
    return "compiled" if _impl.__name__.endswith("_fastkern") else "numpy"
