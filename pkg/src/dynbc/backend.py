"""Select the compiled convolution core, falling back to NumPy.

Set ``DYNBC_PURE_PY=1`` to force the NumPy fallback (used by the benchmark
to compare both backends in one process).
"""

import os

if os.environ.get("DYNBC_PURE_PY"):
    from . import _core_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _core_py as _impl

        BACKEND = "python"

apply_shared = _impl.apply_shared
apply_banked = _impl.apply_banked
apply_bank_outer = _impl.apply_bank_outer
