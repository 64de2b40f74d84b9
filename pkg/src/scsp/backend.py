"""Kernel backend selection.

The eigendecomposition sweep is the one hot scalar loop in the package, so it
ships both as a Cython extension (scsp._kernels) and as a vectorized numpy
module (scsp._kernels_py). Selection happens once at import:

  SCSP_BACKEND=auto      compiled if importable, else pure (default)
  SCSP_BACKEND=compiled  require the extension, ImportError if missing
  SCSP_BACKEND=pure      force the numpy fallback
"""

import os

from . import _kernels_py


def _select():
    choice = os.environ.get("SCSP_BACKEND", "auto").lower()
    if choice not in ("auto", "compiled", "pure"):
        raise ValueError(f"SCSP_BACKEND must be auto, compiled or pure, got {choice!r}")
    if choice == "pure":
        return _kernels_py, "pure"
    try:
        from . import _kernels
        return _kernels, "compiled"
    except ImportError:
        if choice == "compiled":
            raise
        return _kernels_py, "pure"


_impl, BACKEND = _select()

jacobi_eigh = _impl.jacobi_eigh
