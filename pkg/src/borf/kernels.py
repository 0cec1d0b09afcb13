"""Backend selection for the receptive-field encoder.

The compiled core is used when it was built; ``BORF_BACKEND=python`` forces
the numpy fallback. Both produce identical codes.
"""

import os

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS = {"python": _kernels_py.encode_signal}
if _kernels_c is not None:
    BACKENDS["cython"] = _kernels_c.encode_signal

_requested = os.environ.get("BORF_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"BORF_BACKEND={_requested!r} is not available (have {sorted(BACKENDS)})")
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")
encode_signal = BACKENDS[BACKEND]
