"""Selects kernel implementations at import time.

The iteration-bound kernels (Jacobi rotations, the fused optimizer
update) come from the compiled extension when it built; the
matmul-bound network kernels always run on numpy, whose BLAS beats a
scalar C loop for those shapes (see benchmarks/bench_backends.py).
INFOSHIFT_PURE_PY=1 forces everything onto numpy, which is how the
backend-agreement tests and the benchmark pin each side.
"""

from __future__ import annotations

import os

from . import _npkern

_compiled = None
if os.environ.get("INFOSHIFT_PURE_PY") != "1":
    try:
        from . import _ckern as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND_NAME = "compiled" if _compiled is not None else "numpy"

_iter_mod = _compiled if _compiled is not None else _npkern

jacobi_eig = _iter_mod.jacobi_eig
adamw_update = _iter_mod.adamw_update
mlp2_forward = _npkern.mlp2_forward
mlp2_backward = _npkern.mlp2_backward

__all__ = [
    "BACKEND_NAME",
    "jacobi_eig",
    "adamw_update",
    "mlp2_forward",
    "mlp2_backward",
]
