"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``PLANTEDFG_BACKEND=python`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("PLANTEDFG_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

zf_batch = _active.zf_batch
messages_batch = _active.messages_batch
assignment_log_weights = _active.assignment_log_weights
