"""Numpy versions of the compiled inner loops."""

import numpy as np


def block_energies(z, block_dims):
    z = np.asarray(z, dtype=np.float64)
    n = z.ndim
    grid = tuple(z.shape[t] // block_dims[t] for t in range(n))
    # split every mode into (within-block, block index) and sum out the former
    split = []
    for t in range(n):
        split += [block_dims[t], grid[t]]
    sq = np.reshape(z * z, split, order="F")
    return np.asfortranarray(sq.sum(axis=tuple(range(0, 2 * n, 2))))


def max_abs_inner(d, block_len, within):
    d = np.asarray(d, dtype=np.float64)
    g = np.abs(d.T @ d)
    ncol = g.shape[0]
    if ncol < 2:
        return 0.0
    iu, ju = np.triu_indices(ncol, k=1)
    if within:
        keep = (iu // block_len) == (ju // block_len)
        iu, ju = iu[keep], ju[keep]
        if iu.size == 0:
            return 0.0
    return float(g[iu, ju].max())
