"""Pure-numpy fallback for the scatter-add kernels.

``np.add.at`` is unbuffered and applies updates in the order of the index
array, so the accumulation order (ascending input row) matches the compiled
kernel bit for bit.
"""

import numpy as np

COMPILED = False


def scatter_rows_dense(targets, scales, block, out):
    """out[targets[i], :] += scales[i] * block[i, :] for ascending i."""
    np.add.at(out, targets, scales[:, None] * block)


def scatter_entries_sparse(entry_targets, entry_scales, cols, vals, out):
    """out[entry_targets[k], cols[k]] += entry_scales[k] * vals[k],
    entries ordered by input row."""
    np.add.at(out, (entry_targets, cols), entry_scales * vals)
