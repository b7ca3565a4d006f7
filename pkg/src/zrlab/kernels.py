"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
reference kernels are used.  Setting ``ZRLAB_PURE_PYTHON=1`` forces the
fallback.  ``BACKEND`` names the active choice.
"""

import os

from . import _kernels_py

if os.environ.get("ZRLAB_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

log_convolve = _impl.log_convolve
rank_many = _impl.rank_many
sector_moves = _impl.sector_moves
fenwick_build = _impl.fenwick_build
kmc_advance = _impl.kmc_advance

STATUS_HORIZON = _kernels_py.STATUS_HORIZON
STATUS_NEED_UNIFORMS = _kernels_py.STATUS_NEED_UNIFORMS
STATUS_BUFFER_FULL = _kernels_py.STATUS_BUFFER_FULL
STATUS_DEAD = _kernels_py.STATUS_DEAD


def backends():
    """Both kernel modules, for benchmarks and cross-checks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
