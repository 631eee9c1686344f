"""Hot-path kernels with a compiled core and a pure-numpy fallback.

Backend selection happens at import time. STRUCTKIT_KERNELS overrides:
"cython" requires the compiled extension, "numpy" forces the fallback,
"auto" (default) prefers the extension when available.
"""

import os

from structkit.kernels import py_ref

_choice = os.environ.get("STRUCTKIT_KERNELS", "auto")

if _choice not in ("auto", "cython", "numpy"):
    raise ValueError(f"STRUCTKIT_KERNELS must be auto|cython|numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = py_ref
    BACKEND = "numpy"
else:
    try:
        from structkit.kernels import _core as _impl
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = py_ref
        BACKEND = "numpy"

masked_softmax = _impl.masked_softmax
masked_softmax_bwd = _impl.masked_softmax_bwd
cross_entropy_rows = _impl.cross_entropy_rows
gelu = _impl.gelu
gelu_bwd = _impl.gelu_bwd
layernorm = _impl.layernorm
layernorm_bwd = _impl.layernorm_bwd
bce_with_logits = _impl.bce_with_logits
adamw_update = _impl.adamw_update

KERNEL_NAMES = (
    "masked_softmax", "masked_softmax_bwd", "cross_entropy_rows",
    "gelu", "gelu_bwd", "layernorm", "layernorm_bwd",
    "bce_with_logits", "adamw_update",
)
