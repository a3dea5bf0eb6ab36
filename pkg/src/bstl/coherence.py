"""Coherence metrics for single matrices and for matrix sets.

All metrics assume unit-norm columns. Blocks are consecutive column groups.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import prod, sqrt

import numpy as np

from . import kernels
from .exceptions import ShapeError, StructureError
from .tensor import block_norms


def _check_width(m, d):
    if d < 1 or m.shape[1] % d:
        raise StructureError(f"block length {d} does not divide {m.shape[1]} columns")


def _gram_blocks(m, d):
    """Gram matrix of ``m`` reshaped to (s, s, d, d) block form."""
    s = m.shape[1] // d
    g = m.T @ m
    return g.reshape(s, d, s, d).transpose(0, 2, 1, 3)


def _spectral_norms(blocks):
    # ||B||_2 = sqrt(lambda_max(B^T B)), batched through a symmetric eigen-solve
    sym = np.swapaxes(blocks, -1, -2) @ blocks
    lam = np.linalg.eigvalsh(sym)[..., -1]
    return np.sqrt(np.clip(lam, 0.0, None))


def matrix_coherence(m):
    """Largest |<m_i, m_j>| over distinct columns. A single column gives 0."""
    m = np.asarray(m, dtype=np.float64)
    return kernels.max_abs_inner(m, 1, False)


def block_coherence(m, d):
    m = np.asarray(m, dtype=np.float64)
    _check_width(m, d)
    if d == 1:
        return matrix_coherence(m)
    s = m.shape[1] // d
    if s < 2:
        return 0.0
    blocks = _gram_blocks(m, d)
    iu, ju = np.triu_indices(s, k=1)
    return float(_spectral_norms(blocks[iu, ju]).max() / d)


def sub_coherence(m, d):
    m = np.asarray(m, dtype=np.float64)
    _check_width(m, d)
    if d == 1:
        return 0.0
    return kernels.max_abs_inner(m, d, True)


def diagonal_block_norm(m, d):
    """max_i ||m_[i]^T m_[i]||_2 / d, the per-mode factor used when indices are shared."""
    m = np.asarray(m, dtype=np.float64)
    _check_width(m, d)
    if d == 1:
        return 1.0
    blocks = _gram_blocks(m, d)
    diag = blocks[np.arange(blocks.shape[0]), np.arange(blocks.shape[0])]
    return float(np.linalg.eigvalsh(diag)[:, -1].max() / d)


def _varpi(mu, g, t):
    n = len(mu)
    best = 0.0
    for shared in combinations(range(n), t):
        val = prod(g[l] if l in shared else mu[l] for l in range(n))
        best = max(best, val)
    return best ** (1.0 / n)


def _tau(nu, t, all_scalar):
    n = len(nu)
    if all_scalar:
        return 0.0
    best = 0.0
    for shared in combinations(range(n), t):
        val = prod(nu[l] for l in range(n) if l not in shared)
        best = max(best, val)
    return best ** (1.0 / (n - t))


@dataclass
class CoherenceProfile:
    """Per-mode coherences together with the set-level arrays indexed by shared count."""

    d: tuple
    mu: tuple
    nu: tuple
    mu_plain: tuple
    g: tuple
    varpi: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.d)

    @property
    def block_size(self):
        return prod(self.d)

    def as_dict(self):
        return {
            "d": list(self.d),
            "mu": list(self.mu),
            "nu": list(self.nu),
            "mu_plain": list(self.mu_plain),
            "varpi": [float(v) for v in self.varpi],
            "tau": [float(v) for v in self.tau],
        }

    @classmethod
    def from_values(cls, varpi, tau, d):
        """Profile built directly from set-level values.

        Scalars are broadcast to every shared count. Per-mode fields are
        unknown in this case and left as NaN.
        """
        d = tuple(int(v) for v in d)
        n = len(d)
        varpi = np.broadcast_to(np.asarray(varpi, dtype=float), (n,)).copy()
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (n,)).copy()
        if np.any(varpi < 0) or np.any(tau < 0):
            raise ValueError("coherence values must be nonnegative")
        nan = (float("nan"),) * n
        return cls(d, nan, nan, nan, nan, varpi, tau)


def mutual_block_coherence(ensemble, t=0):
    n = ensemble.n
    if not 0 <= t < n:
        raise ValueError(f"shared count {t} outside 0..{n - 1}")
    mu = [block_coherence(m, d) for m, d in zip(ensemble.matrices, ensemble.d)]
    g = [diagonal_block_norm(m, d) for m, d in zip(ensemble.matrices, ensemble.d)]
    return _varpi(mu, g, t)


def mutual_sub_coherence(ensemble, t=0):
    n = ensemble.n
    if not 0 <= t < n:
        raise ValueError(f"shared count {t} outside 0..{n - 1}")
    nu = [sub_coherence(m, d) for m, d in zip(ensemble.matrices, ensemble.d)]
    return _tau(nu, t, all(d == 1 for d in ensemble.d))


def coherence_profile(ensemble):
    mats, ds = ensemble.matrices, ensemble.d
    mu = tuple(block_coherence(m, d) for m, d in zip(mats, ds))
    nu = tuple(sub_coherence(m, d) for m, d in zip(mats, ds))
    plain = tuple(matrix_coherence(m) for m in mats)
    g = tuple(diagonal_block_norm(m, d) for m, d in zip(mats, ds))
    return _assemble(ds, mu, nu, plain, g)


def _assemble(ds, mu, nu, plain, g, tau_nu=None):
    n = len(ds)
    scalar = all(d == 1 for d in ds)
    tau_nu = nu if tau_nu is None else tau_nu
    varpi = np.array([_varpi(mu, g, t) for t in range(n)])
    tau = np.array([_tau(tau_nu, t, scalar) for t in range(n)])
    return CoherenceProfile(tuple(ds), mu, nu, plain, g, varpi, tau)


def irregular_fallback_coherence(ensemble, irregular_modes):
    """Profile with block length 1 on modes whose block lengths are irregular.

    A regrouped mode enters the sub-coherence through its plain matrix
    coherence, since it no longer has blocks of its own.
    """
    modes = set(irregular_modes)
    if any(not 0 <= t < ensemble.n for t in modes):
        raise ValueError("irregular mode index out of range")
    changed = {t for t in modes if ensemble.d[t] > 1}
    if not changed:
        return coherence_profile(ensemble)
    d = tuple(1 if t in changed else dt for t, dt in enumerate(ensemble.d))
    regrouped = ensemble.with_block_lengths(d)
    base = coherence_profile(regrouped)
    tau_nu = tuple(base.mu_plain[t] if t in changed else base.nu[t] for t in range(ensemble.n))
    return _assemble(d, base.mu, base.nu, base.mu_plain, base.g, tau_nu)


def shadow_sparsity(support):
    if len(support) == 0:
        raise StructureError("shadow sparsity of an empty support")
    return support.shadow()


def block_mixed_norms(m, d):
    """Largest row-block and column-block sums of block spectral norms."""
    m = np.asarray(m, dtype=np.float64)
    if d < 1 or m.shape[0] % d or m.shape[1] % d:
        raise StructureError(f"block length {d} does not divide shape {m.shape}")
    r, c = m.shape[0] // d, m.shape[1] // d
    blocks = m.reshape(r, d, c, d).transpose(0, 2, 1, 3)
    norms = np.linalg.norm(blocks, ord=2, axis=(2, 3))
    return float(norms.sum(axis=1).max()), float(norms.sum(axis=0).max())


def snr(x, ensemble, noise):
    """Signal-to-noise power ratio (linear). Zero noise gives ``inf``."""
    clean = ensemble.apply(x)
    noise = np.asarray(noise)
    if noise.shape != clean.shape:
        raise ShapeError(f"noise shape {noise.shape} differs from measurement shape {clean.shape}")
    pn = float(np.sum(noise * noise))
    ps = float(np.sum(clean * clean))
    return float("inf") if pn == 0 else ps / pn


def mar(x, support):
    """sqrt(k) times the smallest supported block norm, over the total norm."""
    x = np.asarray(x)
    norms = block_norms(x, support.structure)
    vals = np.array([norms[tup] for tup in support])
    if vals.size == 0 or np.any(vals == 0):
        raise ValueError("MAR is undefined when a supported block is zero")
    return float(sqrt(len(vals)) * vals.min() / np.linalg.norm(x))
