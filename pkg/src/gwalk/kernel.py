"""Kernel dispatcher: picks the compiled walk kernel when available.

Set GWALK_PURE_PYTHON=1 to force the pure-Python reference implementation
(used by the parity test and as a fallback when the extension failed to
build). Both kernels produce bit-identical output for equal seeds.
"""

from __future__ import annotations

import os
import warnings

from . import _pykernel

if os.environ.get("GWALK_PURE_PYTHON") == "1":
    _impl = _pykernel
else:
    try:
        from . import _ckernel as _impl  # type: ignore[no-redef]
    except ImportError:
        warnings.warn(
            "compiled walk kernel unavailable, using the pure-Python fallback"
        )
        _impl = _pykernel

run_walk = _impl.run_walk
KERNEL_IMPL = _impl.KERNEL_IMPL

MODE_STEPS = _pykernel.MODE_STEPS
MODE_CROSSINGS = _pykernel.MODE_CROSSINGS
STATUS_OK = _pykernel.STATUS_OK
STATUS_BUDGET = _pykernel.STATUS_BUDGET

pure_run_walk = _pykernel.run_walk
