"""Hot kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``DLGN_NUMBA`` is not set to
``0``/``false``/``off``. Both paths expose the same three functions.
"""

from __future__ import annotations

import os

from . import _numpy as numpy_impl

numba_impl = None
_flag = os.environ.get("DLGN_NUMBA", "1").strip().lower()
if _flag not in ("0", "false", "off", "no"):
    try:
        from . import _numba as numba_impl
    except ImportError:  # pragma: no cover - numba missing
        numba_impl = None

backend = numba_impl if numba_impl is not None else numpy_impl
BACKEND_NAME = "numba" if numba_impl is not None else "numpy"

layer_forward = backend.layer_forward
layer_backward = backend.layer_backward
eval_packed_words = backend.eval_packed_words

__all__ = ["BACKEND_NAME", "eval_packed_words", "layer_backward", "layer_forward",
           "numba_impl", "numpy_impl"]
