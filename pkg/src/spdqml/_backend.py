"""Select the kernel implementation at import time.

Set ``SPDQML_PURE_PYTHON=1`` to force the numpy fallback even when the
compiled extension is importable.
"""
import os

from spdqml import _kernels_py as python_kernels

compiled_kernels = None
if not os.environ.get("SPDQML_PURE_PYTHON"):
    try:
        from spdqml import _kernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"
