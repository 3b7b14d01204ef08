"""Backend selection for the frame-objective kernels.

The compiled extension is used when it imports; otherwise the NumPy
implementation takes over.  Setting ``CURVLAB_PURE_PYTHON=1`` forces the
fallback (the benchmark and the cross-backend tests rely on this).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("CURVLAB_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "cython"


_impl, BACKEND = _load()

objective = _impl.objective
objective_grad = _impl.objective_grad
objective_batch = _impl.objective_batch
ascend = _impl.ascend
retract = _impl.retract


def backends() -> dict[str, ModuleType]:
    """All importable implementations, keyed by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
