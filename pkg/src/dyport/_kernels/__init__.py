"""Backend selection for the hot betweenness kernel.

The compiled Cython kernel is preferred; the pure-Python twin is the
fallback when the extension was not built. ``DYPORT_PURE_PYTHON=1`` forces
the fallback (used by the benchmark and the parity tests). Both backends
produce identical results.
"""

from __future__ import annotations

import os

from dyport._kernels.betweenness_py import edge_betweenness_kernel as _py_kernel

if os.environ.get("DYPORT_PURE_PYTHON") == "1":
    edge_betweenness_kernel = _py_kernel
    BACKEND = "python"
else:
    try:
        from dyport._kernels._betweenness_cy import (  # type: ignore[no-redef]
            edge_betweenness_kernel,
        )

        BACKEND = "cython"
    except ImportError:
        edge_betweenness_kernel = _py_kernel
        BACKEND = "python"

__all__ = ["edge_betweenness_kernel", "BACKEND"]
