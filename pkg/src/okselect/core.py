"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when importable; otherwise the
numpy implementations in ``_pycore`` are. Setting the environment variable
``OKSELECT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pycore

if os.environ.get("OKSELECT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pycore
        BACKEND = "python"

expansion_predict = _impl.expansion_predict
gram_row = _impl.gram_row
rff_features = _impl.rff_features

__all__ = ["BACKEND", "expansion_predict", "gram_row", "rff_features"]
