"""Dense n-way arrays, mode products and block bookkeeping.

Tensors are plain ``numpy.ndarray`` objects. Vectorization is always
mode-1-fastest (Fortran order), which makes the Kronecker identity

    vec(X x_1 D_1 ... x_n D_n) = (D_n kron ... kron D_1) vec(X)

hold with the operand order written above. Block and mode indices are
0-based throughout.
"""

from dataclasses import dataclass
from functools import reduce
from itertools import product
from math import prod

import numpy as np

from . import kernels
from .exceptions import ShapeError, StructureError


@dataclass(frozen=True)
class BlockStructure:
    """Per-mode block lengths ``d`` and block counts ``s``."""

    d: tuple
    s: tuple

    def __post_init__(self):
        d = tuple(int(v) for v in self.d)
        s = tuple(int(v) for v in self.s)
        if len(d) != len(s) or not d:
            raise StructureError("d and s must be non-empty and of equal length")
        if min(d) < 1 or min(s) < 1:
            raise StructureError("block lengths and counts must be positive")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_shape(cls, shape, d):
        shape, d = tuple(shape), tuple(d)
        if len(shape) != len(d):
            raise StructureError("shape and block lengths differ in length")
        for size, length in zip(shape, d):
            if length < 1 or size % length:
                raise StructureError(f"block length {length} does not divide {size}")
        return cls(d, tuple(size // length for size, length in zip(shape, d)))

    @property
    def n(self):
        return len(self.d)

    @property
    def shape(self):
        return tuple(a * b for a, b in zip(self.d, self.s))

    @property
    def block_size(self):
        return prod(self.d)

    @property
    def n_blocks(self):
        return prod(self.s)

    def check_tuple(self, tup):
        tup = tuple(int(i) for i in tup)
        if len(tup) != self.n or any(not 0 <= i < s for i, s in zip(tup, self.s)):
            raise StructureError(f"block tuple {tup} outside grid {self.s}")
        return tup

    def slices(self, tup):
        return tuple(slice(i * d, (i + 1) * d) for i, d in zip(tup, self.d))

    def tuples(self):
        """All block tuples in lexicographic order."""
        return product(*(range(s) for s in self.s))

    def flat_index(self, tup):
        """Lexicographic rank of a block tuple."""
        return int(np.ravel_multi_index(tup, self.s))

    def tuple_at(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.s))


class BlockSupport:
    """An ordered set of distinct block tuples on a fixed grid."""

    def __init__(self, tuples, structure):
        self.structure = structure
        seen = []
        for tup in tuples:
            tup = structure.check_tuple(tup)
            if tup in seen:
                raise StructureError(f"duplicate block tuple {tup}")
            seen.append(tup)
        self.tuples = tuple(seen)

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __contains__(self, tup):
        return tuple(tup) in self.tuples

    def __eq__(self, other):
        if not isinstance(other, BlockSupport):
            return NotImplemented
        return self.structure == other.structure and set(self.tuples) == set(other.tuples)

    def __hash__(self):
        return hash((self.structure, frozenset(self.tuples)))

    def __repr__(self):
        return f"BlockSupport({list(self.tuples)})"

    @property
    def k(self):
        return len(self.tuples)

    def sorted(self):
        return BlockSupport(sorted(self.tuples), self.structure)

    def mode_indices(self, t):
        """Distinct block indices used on mode ``t``, ascending."""
        return sorted({tup[t] for tup in self.tuples})

    def shadow(self):
        """Per-mode shadow sparsities: distinct indices touched on each mode."""
        return tuple(len(self.mode_indices(t)) for t in range(self.structure.n))

    def mask(self):
        """Boolean array marking every scalar entry covered by the support."""
        out = np.zeros(self.structure.shape, dtype=bool)
        for tup in self.tuples:
            out[self.structure.slices(tup)] = True
        return out


@dataclass
class CascadingOperator:
    """Column-stacked Kronecker blocks for a list of block tuples."""

    matrix: np.ndarray
    tuples: tuple
    block_size: int


def vectorize(x):
    return np.ravel(np.asarray(x), order="F")


def devectorize(v, shape):
    v = np.asarray(v)
    if v.size != prod(shape):
        raise ShapeError(f"cannot reshape {v.size} entries into {tuple(shape)}")
    return np.reshape(v, tuple(shape), order="F")


def mode_product(x, m, t):
    """Mode-``t`` product: every mode-``t`` fiber of ``x`` is mapped by ``m``."""
    x = np.asarray(x)
    m = np.asarray(m)
    if not 0 <= t < x.ndim:
        raise ShapeError(f"mode {t} out of range for order-{x.ndim} tensor")
    if m.ndim != 2 or m.shape[1] != x.shape[t]:
        raise ShapeError(f"matrix of shape {m.shape} cannot act on mode {t} of size {x.shape[t]}")
    out = np.tensordot(m, x, axes=(1, t))
    return np.asfortranarray(np.moveaxis(out, 0, t))


def multi_mode_product(x, matrices, transpose=False):
    """Apply one matrix per mode. ``transpose`` applies their transposes instead."""
    matrices = list(matrices)
    x = np.asarray(x)
    if len(matrices) != x.ndim:
        raise ShapeError(f"{len(matrices)} matrices for an order-{x.ndim} tensor")
    for t, m in enumerate(matrices):
        x = mode_product(x, m.T if transpose else m, t)
    return x


def kron_chain(matrices):
    """``D_n kron ... kron D_1`` for the list ``[D_1, ..., D_n]``."""
    return reduce(lambda acc, m: np.kron(m, acc), matrices[1:], np.asarray(matrices[0]))


def block_columns(matrix, d, i):
    return matrix[:, i * d:(i + 1) * d]


def kron_block(matrices, structure, tup):
    """Kronecker product of the sub-blocks selected by ``tup``."""
    parts = [block_columns(m, d, i) for m, d, i in zip(matrices, structure.d, tup)]
    return kron_chain(parts)


def build_cascading(matrices, structure, support):
    """Stack the Kronecker blocks of every tuple in ``support`` column-wise."""
    tuples = tuple(support)
    rows = prod(m.shape[0] for m in matrices)
    if not tuples:
        return CascadingOperator(np.zeros((rows, 0)), (), structure.block_size)
    cols = [kron_block(matrices, structure, tup) for tup in tuples]
    return CascadingOperator(np.hstack(cols), tuples, structure.block_size)


def block_correlation(r, matrices, structure, tup):
    """Frobenius norm of ``r`` mapped by the transposed blocks of ``tup``."""
    parts = [block_columns(m, d, i) for m, d, i in zip(matrices, structure.d, tup)]
    return float(np.linalg.norm(multi_mode_product(r, parts, transpose=True)))


def shadow_extract(x, structure, support):
    """Sub-tensor formed by the block indices the support touches on each mode."""
    x = np.asarray(x)
    if x.shape != structure.shape:
        raise ShapeError(f"tensor shape {x.shape} does not match {structure.shape}")
    idx = []
    for t in range(structure.n):
        d = structure.d[t]
        idx.append(np.concatenate([np.arange(i * d, (i + 1) * d) for i in support.mode_indices(t)]))
    return x[np.ix_(*idx)]


def block_norms(x, structure):
    """Frobenius norm of every block, as an array shaped like the block grid."""
    return np.sqrt(kernels.block_energies(x, structure.d))
