"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``REPFLOW_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation is used.
"""

from __future__ import annotations

import os

from . import _pykernels

_force_py = os.environ.get("REPFLOW_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "compiled"

sym_eigh = _impl.sym_eigh
stencil_sum = _impl.stencil_sum
stencil_max = _impl.stencil_max
greedy_cover = _impl.greedy_cover
min_sq_distance = _impl.min_sq_distance


def available_backends() -> dict:
    """Map backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["compiled"] = _ckernels
    return out
