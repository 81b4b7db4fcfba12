"""Kernel backend selection.

The compiled extension is used when it imports cleanly; otherwise (or when the
environment variable EXBC_FORCE_FALLBACK is set to a non-empty value) the pure
NumPy implementation takes over.  Both expose the same three callables.
"""

import os

if os.environ.get("EXBC_FORCE_FALLBACK"):
    from exbc.nets import _kernels_py as _impl

    backend_name = "fallback"
else:
    try:
        from exbc.nets import _kernels as _impl  # type: ignore[attr-defined]

        backend_name = "compiled"
    except ImportError:
        from exbc.nets import _kernels_py as _impl

        backend_name = "fallback"

mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
adamw_step = _impl.adamw_step
