"""Greedy block pursuit for block-sparse tensors and its degenerate variants."""

from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import kernels
from .bounds import check_erc
from .ensemble import MeasurementEnsemble
from .exceptions import ShapeError
from .tensor import BlockStructure, BlockSupport, devectorize, kron_block, vectorize

VARIANTS = ("omp", "bomp", "bols", "t-omp", "t-bomp", "t-gomp", "t-gbomp", "cosamp-style")


@dataclass
class RecoveryConfig:
    """Settings for one pursuit run.

    ``eps`` is an absolute residual tolerance; when omitted the run stops at
    ``rel_eps * ||Y||``. ``max_iterations`` defaults to ``k``.
    """

    k: int
    s: int = 1
    eps: float = None
    rel_eps: float = 1e-6
    max_iterations: int = None
    variant: str = "match"
    prune_to_k: bool = True

    def __post_init__(self):
        if self.k < 1 or self.s < 1:
            raise ValueError("k and s must be positive")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.variant not in ("match", "ols-1mode"):
            raise ValueError(f"unknown selection rule {self.variant!r}")


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    support: BlockSupport
    residual_norms: list
    iterations: int
    selections: list = field(default_factory=list)
    orthogonality: list = field(default_factory=list)
    erc_margins: list = None
    rank_deficient: bool = False
    mask: np.ndarray = None

    @property
    def residual_norm(self):
        return self.residual_norms[-1]


def _solve(op, y):
    """Least squares through a reduced QR; falls back to the minimum-norm solution."""
    rows, cols = op.shape
    if cols <= rows:
        q, r = np.linalg.qr(op)
        diag = np.abs(np.diag(r))
        if diag.min() > 1e-12 * max(diag.max(), 1e-300):
            return np.linalg.solve(r, q.T @ y), False
    return np.linalg.lstsq(op, y, rcond=None)[0], True


def least_squares_on_support(y, ensemble, support):
    """Coefficient blocks minimizing the residual over ``support``.

    Returns ``(blocks, rank_deficient)`` where ``blocks`` has shape
    ``(len(support), *d)``.
    """
    tuples = list(support)
    if not tuples:
        raise ValueError("least squares on an empty support")
    struct = ensemble.structure
    op = np.hstack([kron_block(ensemble.matrices, struct, tup) for tup in tuples])
    coef, deficient = _solve(op, vectorize(y))
    bs = struct.block_size
    blocks = np.stack([devectorize(coef[i * bs:(i + 1) * bs], struct.d) for i in range(len(tuples))])
    return blocks, deficient


def _match_scores(r, ensemble, state):
    z = ensemble.adjoint(r)
    return np.sqrt(kernels.block_energies(z, ensemble.d))


def _ols_scores(r, ensemble, state):
    # projected-normalized correlations, one mode only
    (d_mat,) = ensemble.matrices
    corr = d_mat.T @ r
    q = state.get("q")
    if q is None:
        norms = np.ones(d_mat.shape[1])
    else:
        full = state.setdefault("col_sq", np.einsum("ij,ij->j", d_mat, d_mat))
        qd = q.T @ d_mat
        sq = full - np.einsum("ij,ij->j", qd, qd)
        # cancellation leaves nearly spanned columns inaccurate; redo those directly
        shaky = sq < 1e-6 * full
        if shaky.any():
            rest = d_mat[:, shaky] - q @ qd[:, shaky]
            sq[shaky] = np.einsum("ij,ij->j", rest, rest)
        norms = np.sqrt(np.maximum(sq, 0.0))
    usable = norms > 1e-10
    ratio = np.where(usable, corr / np.where(usable, norms, 1.0), 0.0)
    scores = np.sqrt(kernels.block_energies(ratio, ensemble.d))
    blocked = ~np.reshape(usable, (ensemble.d[0], -1), order="F").any(axis=0)
    scores[blocked] = -np.inf
    return scores


def _pursuit(y, ensemble, cfg, scorer, true_support=None):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != ensemble.M:
        raise ShapeError(f"measurement shape {y.shape} differs from {ensemble.M}")
    struct = ensemble.structure
    y_norm = float(np.linalg.norm(y))
    eps = cfg.rel_eps * y_norm if cfg.eps is None else cfg.eps
    max_iter = cfg.k if cfg.max_iterations is None else cfg.max_iterations
    y_vec = vectorize(y)

    selected, columns = [], []
    taken = np.zeros(struct.n_blocks, dtype=bool)
    r = y.copy()
    norms = [y_norm]
    history, ortho = [], []
    margins = [] if true_support is not None else None
    deficient = False
    coef = np.zeros(0)
    state = {}
    it = 0
    while it < max_iter and norms[-1] > eps:
        if margins is not None:
            margins.append(check_erc(ensemble, true_support, r, cfg.s))
        scores = np.ravel(scorer(r, ensemble, state), order="C")
        scores = np.where(taken, -np.inf, scores)
        order = np.argsort(-scores, kind="stable")
        pick = [int(i) for i in order[:cfg.s] if np.isfinite(scores[i])]
        if not pick:
            break
        new = [struct.tuple_at(i) for i in pick]
        taken[pick] = True
        selected += new
        columns += [kron_block(ensemble.matrices, struct, tup) for tup in new]
        op = np.hstack(columns)
        coef, bad = _solve(op, y_vec)
        deficient = deficient or bad
        res_vec = y_vec - op @ coef
        r = devectorize(res_vec, ensemble.M)
        norms.append(float(np.linalg.norm(res_vec)))
        ortho.append(float(np.linalg.norm(op.T @ res_vec)))
        history.append(new)
        if cfg.variant == "ols-1mode":
            state["q"] = np.linalg.qr(op)[0] if not bad else np.linalg.svd(op, full_matrices=False)[0]
        it += 1

    est = np.zeros(struct.shape)
    bs = struct.block_size
    block_vals = {}
    for i, tup in enumerate(selected):
        block_vals[tup] = devectorize(coef[i * bs:(i + 1) * bs], struct.d)
    keep = list(selected)
    if cfg.prune_to_k and len(keep) > cfg.k:
        ranked = sorted(keep, key=lambda tup: (-np.linalg.norm(block_vals[tup]), tup))
        keep = ranked[:cfg.k]
    for tup in keep:
        est[struct.slices(tup)] = block_vals[tup]
    support = BlockSupport(sorted(keep), struct)
    return RecoveryResult(est, support, norms, it, history, ortho, margins, deficient, support.mask())


def tgbomp(y, ensemble, cfg, true_support=None):
    """Tensor generalized block OMP.

    Each iteration scores every unselected block tuple by the norm of the
    residual mapped through the transposed blocks, adds the ``cfg.s`` best
    (ties go to the lexicographically smallest tuple), refits by least
    squares over all selected blocks and updates the residual. When
    ``true_support`` is given, the exact-recovery margin is recorded before
    every selection.
    """
    return _pursuit(y, ensemble, cfg, _match_scores, true_support)


def bols_1mode(y, d_mat, d, k, eps=None):
    """Block orthogonal least squares on a single-mode problem."""
    ens = d_mat if isinstance(d_mat, MeasurementEnsemble) else MeasurementEnsemble([d_mat], d=(d,))
    cfg = RecoveryConfig(k=k, s=1, eps=eps, variant="ols-1mode")
    return _pursuit(np.asarray(y).ravel(), ens, cfg, _ols_scores)


def _scalar_ensemble(ensemble):
    return MeasurementEnsemble(ensemble.matrices, d=(1,) * ensemble.n)


def _vector_ensemble(ensemble, d1):
    return MeasurementEnsemble([ensemble.kron()], d=(d1,))


def run_variant(name, y, ensemble, k, s=2, eps=None, true_support=None):
    """Run a named pursuit variant on tensor data.

    ``k`` is the block sparsity under the ensemble's block structure.
    Variants without block structure work with the scalar sparsity
    ``k * prod(d)``. Single-mode variants (``omp``, ``bomp``, ``bols``) act on
    the vectorized problem with the Kronecker dictionary, using blocks of
    ``d_1`` consecutive entries, which is the block pattern mode-1-fastest
    vectorization keeps contiguous. The returned ``estimate`` and ``mask``
    are always in tensor shape.
    """
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    y = np.asarray(y, dtype=np.float64)
    d = ensemble.d
    big_k = k * prod(d)
    vec_k = k * prod(d[1:])
    shape = ensemble.N

    if name in ("t-gbomp", "t-bomp"):
        sel = s if name == "t-gbomp" else 1
        return tgbomp(y, ensemble, RecoveryConfig(k=k, s=sel, eps=eps), true_support)
    if name in ("t-gomp", "t-omp", "cosamp-style"):
        sel = {"t-gomp": s, "t-omp": 1, "cosamp-style": big_k}[name]
        return tgbomp(y, _scalar_ensemble(ensemble), RecoveryConfig(k=big_k, s=sel, eps=eps))

    y_vec = vectorize(y)
    if name == "omp":
        ens = _vector_ensemble(ensemble, 1)
        res = tgbomp(y_vec, ens, RecoveryConfig(k=big_k, s=1, eps=eps))
    elif name == "bomp":
        ens = _vector_ensemble(ensemble, d[0])
        res = tgbomp(y_vec, ens, RecoveryConfig(k=vec_k, s=1, eps=eps))
    else:
        ens = _vector_ensemble(ensemble, d[0])
        res = bols_1mode(y_vec, ens, d[0], vec_k, eps=eps)
    res.estimate = devectorize(res.estimate, shape)
    res.mask = devectorize(res.mask, shape)
    return res
