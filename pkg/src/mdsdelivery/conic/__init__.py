"""Conic programs and interior-point solvers.

The cone kernels are loaded from the compiled ``_kernels`` extension when it
is importable and from ``_kernels_py`` otherwise; set
``MDSDELIVERY_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MDSDELIVERY_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

KERNEL_BACKEND = "compiled" if kernels.__name__.endswith("._kernels") else "python"

from .program import ConeBlock, ConicProgram  # noqa: E402
from .solver import SolveResult, solve  # noqa: E402

__all__ = ["ConeBlock", "ConicProgram", "SolveResult", "solve", "kernels", "KERNEL_BACKEND"]
