"""Per-mode measurement matrices bundled with their block structure."""

from math import prod

import numpy as np

from .exceptions import ShapeError
from .tensor import BlockStructure, kron_chain, multi_mode_product


class MeasurementEnsemble:
    """Measurement matrices ``[D_1, ..., D_n]`` with unit-norm columns.

    Columns of mode ``t`` are grouped into consecutive blocks of
    ``structure.d[t]`` columns.
    """

    def __init__(self, matrices, d=None, structure=None, atol=1e-10):
        mats = [np.asfortranarray(np.asarray(m, dtype=np.float64)) for m in matrices]
        if not mats or any(m.ndim != 2 for m in mats):
            raise ShapeError("need at least one 2-D measurement matrix")
        if structure is None:
            d = tuple(d) if d is not None else (1,) * len(mats)
            structure = BlockStructure.from_shape([m.shape[1] for m in mats], d)
        if structure.shape != tuple(m.shape[1] for m in mats):
            raise ShapeError("block structure does not match matrix column counts")
        for t, m in enumerate(mats):
            norms = np.linalg.norm(m, axis=0)
            if not np.allclose(norms, 1.0, rtol=0, atol=atol):
                raise ShapeError(f"mode {t} has columns that are not unit norm")
        self.matrices = mats
        self.structure = structure

    @classmethod
    def normalized(cls, matrices, d=None, structure=None):
        """Rescale every column to unit norm, then build the ensemble."""
        mats = []
        for m in matrices:
            m = np.asarray(m, dtype=np.float64)
            norms = np.linalg.norm(m, axis=0)
            if np.any(norms == 0):
                raise ShapeError("cannot normalize a zero column")
            mats.append(m / norms)
        return cls(mats, d=d, structure=structure)

    def __repr__(self):
        return f"MeasurementEnsemble(M={self.M}, N={self.N}, d={self.structure.d})"

    @property
    def n(self):
        return len(self.matrices)

    @property
    def M(self):
        return tuple(m.shape[0] for m in self.matrices)

    @property
    def N(self):
        return tuple(m.shape[1] for m in self.matrices)

    @property
    def d(self):
        return self.structure.d

    @property
    def rows(self):
        return prod(self.M)

    def with_block_lengths(self, d):
        """Same matrices regrouped under different block lengths."""
        return MeasurementEnsemble(self.matrices, d=d)

    def apply(self, x):
        return multi_mode_product(x, self.matrices)

    def adjoint(self, r):
        return multi_mode_product(r, self.matrices, transpose=True)

    def kron(self):
        # cached: vectorized baselines ask for it once per algorithm
        if getattr(self, "_kron", None) is None:
            self._kron = np.asfortranarray(kron_chain(self.matrices))
        return self._kron
