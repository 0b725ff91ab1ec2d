"""Kernel selection: compiled Cython extension if built, numpy fallback otherwise.

Set ``QRSAMPLE_NO_EXT=1`` to force the fallback (used by the benchmark to
compare both paths).  Both implementations perform the same additions in the
same order, so results are bit-identical either way.
"""

import os

if os.environ.get("QRSAMPLE_NO_EXT"):
    from . import _scatter_py as _impl
else:
    try:
        from . import _scatter_cy as _impl
    except ImportError:
        from . import _scatter_py as _impl

COMPILED = _impl.COMPILED
scatter_rows_dense = _impl.scatter_rows_dense
scatter_entries_sparse = _impl.scatter_entries_sparse
