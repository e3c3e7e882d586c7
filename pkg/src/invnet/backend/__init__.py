"""Kernel backend selection.

The compiled Cython kernels are preferred when built; the numpy fallback is
always available. ``INVNET_BACKEND`` forces the choice: ``ext``/``compiled``
requires the extension, ``py``/``numpy`` forces the fallback, ``auto``
(default) picks the extension when importable.
"""

from __future__ import annotations

import os

from . import kernels_py

_requested = os.environ.get("INVNET_BACKEND", "auto").lower()

if _requested in ("py", "numpy"):
    _impl = kernels_py
    _name = "numpy"
elif _requested in ("auto", "ext", "compiled"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        _name = "compiled"
    except ImportError:
        if _requested != "auto":
            raise ImportError(
                "INVNET_BACKEND=%s requested but the compiled kernels are not built"
                % _requested
            )
        _impl = kernels_py
        _name = "numpy"
else:
    raise ValueError(f"unknown INVNET_BACKEND value: {_requested!r}")

sigmoid = _impl.sigmoid
silu = _impl.silu
silu_vjp = _impl.silu_vjp
relu = _impl.relu
relu_vjp = _impl.relu_vjp
adam_update = _impl.adam_update
rd_rhs = _impl.rd_rhs


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'numpy'."""
    return _name
