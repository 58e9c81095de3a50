"""Backend selection for the hot kernels.

Imports the compiled extension when present; falls back to the NumPy
implementation.  Set HYPWAVE_PURE=1 to force the fallback (used by the
parity tests and the benchmark).
"""

import os

if os.environ.get("HYPWAVE_PURE"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
ReductionError = _impl.ReductionError
reduce_batch = _impl.reduce_batch
accum_profile = _impl.accum_profile

# profile_value has no compiled variant; it is cheap and shared
from ._kernels_py import profile_value  # noqa: E402
