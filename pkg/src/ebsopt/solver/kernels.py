"""Import-time selection of the simplex hot kernels.

Prefers the compiled Cython extension; falls back to the numpy
implementation when the extension was not built. Set EBSOPT_FORCE_PY=1 to
force the fallback (used by the kernel benchmark and tests).
"""

import os

if os.environ.get("EBSOPT_FORCE_PY"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
pivot = _impl.pivot
most_violated_row = _impl.most_violated_row
dual_ratio_entering = _impl.dual_ratio_entering
