"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the
pure-Python module is a drop-in replacement producing bit-identical
results. Set ATTNSHIFT_PURE_PY=1 to force the fallback.
"""

import os

from . import pykernels

if os.environ.get("ATTNSHIFT_PURE_PY", "") not in ("", "0"):
    backend = pykernels
    HAVE_COMPILED = False
else:
    try:
        from . import _core as backend  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        backend = pykernels
        HAVE_COMPILED = False

BACKEND_NAME = backend.backend_name()

__all__ = ["backend", "pykernels", "BACKEND_NAME", "HAVE_COMPILED"]
