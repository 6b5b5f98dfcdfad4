"""Hot-loop kernels with a compiled core and a pure NumPy fallback.

The compiled Cython extension is preferred when importable; set
``MASKCAM_PURE_KERNELS=1`` to force the NumPy fallback (used by the
benchmark and by tests that compare the two backends).
"""

import os

from . import _pure

if os.environ.get("MASKCAM_PURE_KERNELS") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

huygens_sum = _impl.huygens_sum

__all__ = ["BACKEND", "huygens_sum"]
