"""Hot-kernel dispatch.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy twin in ``_kernels_py`` takes over. Set ``WTMRD_PURE_PYTHON=1`` to force
the fallback (useful for equivalence tests and benchmarking).
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND: str

if os.environ.get("WTMRD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined,no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

move_toward = _impl.move_toward
neighbor_csr = _impl.neighbor_csr
active_weight_sums = _impl.active_weight_sums
rreq_targets = _impl.rreq_targets
rreq_admit = _impl.rreq_admit

__all__ = ["BACKEND", "move_toward", "neighbor_csr", "active_weight_sums", "rreq_targets",
           "rreq_admit"]
