"""Counting kernels behind the pairwise metrics.

Two interchangeable backends: a compiled Cython extension and a pure-Python
fallback. The compiled one is preferred at import time; set DIVQ_PURE_PYTHON=1
to force the fallback. Both return identical integer counts, so metric values
never depend on the backend.
"""

import os

if os.environ.get("DIVQ_PURE_PYTHON"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

intersect_count = _impl.intersect_count
pairwise_intersect_counts = _impl.pairwise_intersect_counts
clipped_match_count = _impl.clipped_match_count
pairwise_clipped_matches = _impl.pairwise_clipped_matches

__all__ = [
    "BACKEND",
    "intersect_count",
    "pairwise_intersect_counts",
    "clipped_match_count",
    "pairwise_clipped_matches",
]
