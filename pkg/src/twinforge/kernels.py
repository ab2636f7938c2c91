"""Backend selection for the batched per-cell kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
takes over. Set ``TWINFORGE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("TWINFORGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND = _active.BACKEND
det_batch = _active.det_batch
cofactor_batch = _active.cofactor_batch
rank_one_fit_batch = _active.rank_one_fit_batch
orient_signs = _active.orient_signs
