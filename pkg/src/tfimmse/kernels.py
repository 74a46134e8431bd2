"""Backend selection for the Wigner lag-product kernel.

The compiled extension is used when it imports; ``TFIMMSE_PURE=1`` forces the
numpy fallback. ``BACKEND`` names the active one.
"""

import os

from . import _lagprod_py

if os.environ.get("TFIMMSE_PURE", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _lagprod as _compiled
    except ImportError:
        _compiled = None

if _compiled is not None:
    accumulate_lag_products = _compiled.accumulate_lag_products
    BACKEND = "cython"
else:
    accumulate_lag_products = _lagprod_py.accumulate_lag_products
    BACKEND = "numpy"

python_accumulate_lag_products = _lagprod_py.accumulate_lag_products
compiled_accumulate_lag_products = None if _compiled is None else _compiled.accumulate_lag_products
