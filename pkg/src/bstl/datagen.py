"""Seeded generation of measurement ensembles, block-sparse signals and noise.

Every random stream comes from :func:`stream`, which keys a counter-based
generator by (master seed, trial index, purpose). A trial therefore draws
the same numbers whatever worker runs it.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .ensemble import MeasurementEnsemble
from .exceptions import ConfigError
from .tensor import BlockStructure, BlockSupport

STYLES = ("gaussian", "gaussian-block-orthogonal", "high-coherence-small-dim", "orthonormal")
FAMILIES = ("gaussian", "2-pam")


def stream(seed, *keys):
    """Independent generator for ``seed`` and a path of ints or purpose strings."""
    path = tuple(k if isinstance(k, int) else zlib.crc32(str(k).encode()) for k in keys)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=path)))


@dataclass
class EnsembleSpec:
    M: tuple
    structure: BlockStructure
    style: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        self.M = tuple(int(m) for m in self.M)
        if len(self.M) != self.structure.n or min(self.M) < 1:
            raise ConfigError("need one positive measurement size per mode")
        if self.style not in STYLES:
            raise ConfigError(f"unknown ensemble style {self.style!r}")
        if self.style == "gaussian-block-orthogonal" and any(m < d for m, d in zip(self.M, self.structure.d)):
            raise ConfigError("block-orthogonal style needs M_i >= d_i")
        if self.style == "orthonormal" and any(m < n for m, n in zip(self.M, self.structure.shape)):
            raise ConfigError("orthonormal style needs M_i >= N_i")


@dataclass
class SignalSpec:
    structure: BlockStructure
    k: int
    family: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= self.structure.n_blocks:
            raise ConfigError(f"block sparsity {self.k} outside 1..{self.structure.n_blocks}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown signal family {self.family!r}")


def _orthonormalize_blocks(m, d):
    out = np.empty_like(m)
    for j in range(0, m.shape[1], d):
        q, r = np.linalg.qr(m[:, j:j + d])
        out[:, j:j + d] = q * np.sign(np.diag(r))  # keep the orientation of the draw
    return out


def gen_ensemble(spec, rng=None):
    """Gaussian matrices with unit columns, optionally orthonormal within blocks.

    The high-coherence style is the plain Gaussian draw; its coherence comes
    from choosing small ``M`` relative to ``N``.
    """
    rng = stream(spec.seed, "ensemble") if rng is None else rng
    mats = []
    for m, n_cols, d in zip(spec.M, spec.structure.shape, spec.structure.d):
        a = rng.standard_normal((m, n_cols))
        if spec.style == "gaussian-block-orthogonal":
            a = _orthonormalize_blocks(a, d)
        elif spec.style == "orthonormal":
            a = _orthonormalize_blocks(a, n_cols)
        mats.append(a)
    return MeasurementEnsemble.normalized(mats, structure=spec.structure)


def gen_signal(spec, rng=None):
    """Block-sparse tensor with ``k`` blocks placed uniformly without replacement."""
    rng = stream(spec.seed, "signal") if rng is None else rng
    struct = spec.structure
    flat = rng.choice(struct.n_blocks, size=spec.k, replace=False)
    tuples = sorted(struct.tuple_at(int(i)) for i in flat)
    x = np.zeros(struct.shape, order="F")
    for tup in tuples:
        if spec.family == "2-pam":
            vals = rng.choice(np.array([-1.0, 1.0]), size=struct.d)
        else:
            vals = rng.standard_normal(struct.d)
        x[struct.slices(tup)] = vals
    return x, BlockSupport(tuples, struct)


def add_noise(y_clean, target_snr_db, rng=None, seed=0):
    """Add Gaussian noise scaled so the realized SNR equals the target exactly."""
    rng = stream(seed, "noise") if rng is None else rng
    y_clean = np.asarray(y_clean, dtype=np.float64)
    power = float(np.sum(y_clean * y_clean))
    if power == 0:
        raise ValueError("cannot set an SNR for a zero signal")
    g = rng.standard_normal(y_clean.shape)
    scale = np.sqrt(power / 10 ** (target_snr_db / 10.0)) / np.linalg.norm(g)
    noise = g * scale
    return y_clean + noise, noise
