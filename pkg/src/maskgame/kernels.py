"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy versions.
Set ``MASKGAME_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MASKGAME_PURE_PYTHON"):
    from maskgame import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from maskgame import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from maskgame import _kernels_py as _impl

        BACKEND = "python"

group_rows = _impl.group_rows
group_argmax = _impl.group_argmax
match_table = _impl.match_table

__all__ = ["BACKEND", "group_rows", "group_argmax", "match_table"]
