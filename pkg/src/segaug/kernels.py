"""Backend selection for the DP kernels.

The compiled extension is used when importable; set ``SEGAUG_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from segaug import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("SEGAUG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from segaug import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        pass

viterbi_align = _impl.viterbi_align
edit_rows = _impl.edit_rows


def available_backends():
    """Return ``{name: module}`` for every backend that imports."""
    found = {"python": _pykernels}
    try:
        from segaug import _ckernels

        found["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return found
