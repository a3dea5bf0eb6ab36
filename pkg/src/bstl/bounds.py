"""Closed-form recovery guarantees driven by a :class:`CoherenceProfile`.

Counts that index the eigenvalue sandwich come in two forms. A sequence is
read as per-mode counts ``[c_1, ..., c_n]`` and expanded through
``prod(x + c_i - 1)``. A bare scalar ``a`` is split evenly across modes as
``c_i = a ** (1/n)``.

Evaluators that have premises return a :class:`Bound` carrying the value and
the list of premises that failed, instead of raising.
"""

import csv
import io
from dataclasses import dataclass, field
from math import ceil, e, exp, log, log10, prod, sqrt

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import RankDeficiencyError
from .tensor import build_cascading, block_correlation, vectorize

INF = float("inf")


@dataclass
class Bound:
    value: float
    violated: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violated

    def __float__(self):
        return float(self.value)


@dataclass
class WBounds:
    lower: float
    upper: float
    count: object


def gen_coefficients(G):
    """Coefficients ``[C_0, ..., C_n]`` of ``prod(x + G_i)``."""
    G = np.asarray(G, dtype=float).ravel()
    if G.size == 0:
        raise ValueError("need at least one mode")
    return P.polyfromroots(-G)


def coefficients_for_count(alpha, n, per_mode=None):
    if per_mode is not None:
        per_mode = [float(c) for c in per_mode]
        if len(per_mode) != n or not np.isclose(prod(per_mode), alpha):
            raise ValueError("per-mode counts must have length n and multiply to alpha")
        return gen_coefficients([c - 1 for c in per_mode])
    if alpha < 1:
        raise ValueError("count must be at least 1")
    return gen_coefficients([alpha ** (1.0 / n) - 1] * n)


def _count_coefficients(count, n):
    if np.ndim(count) == 0:
        return coefficients_for_count(float(count), n)
    count = [float(c) for c in count]
    if len(count) != n or min(count) < 1:
        raise ValueError(f"need {n} per-mode counts, each at least 1")
    return gen_coefficients([c - 1 for c in count])


def _spread(profile, count):
    n = profile.n
    c = _count_coefficients(count, n)
    cd = gen_coefficients([dt - 1 for dt in profile.d])
    t = np.arange(n)
    within = float(np.sum(cd[:n] * profile.tau ** (n - t)))
    across = float(np.sum(c[:n] * profile.varpi ** n)) * profile.block_size
    return within + across


def w_bounds(profile, count):
    """Lower and upper eigenvalue bounds for a Kronecker Gram over ``count`` blocks."""
    spread = _spread(profile, count)
    return WBounds(1.0 - spread, 1.0 + spread, count)


def w_lower(profile, count):
    return w_bounds(profile, count).lower


def w_upper(profile, count):
    return w_bounds(profile, count).upper


def per_mode_counts(shadow, extra, n):
    """``[k_i + extra]`` for a shadow given per mode, or evenly split from a product."""
    if np.ndim(shadow) == 0:
        base = [float(shadow) ** (1.0 / n)] * n
    else:
        base = [float(v) for v in shadow]
    return [b + extra for b in base]


@dataclass
class SingularValueBounds:
    lower: float
    upper: float

    @property
    def degenerate(self):
        return self.lower > self.upper


def singular_value_bounds(profile, l, l_star):
    """Bounds on the singular values of the cross Gram of two disjoint supports.

    ``l`` and ``l_star`` are per-mode shadow counts of the two supports. The
    upper value bounds the largest singular value. The lower value is the
    product of the two lower eigenvalue bounds; it exceeds the upper value
    whenever the two supports are nearly orthogonal, which is flagged through
    ``degenerate``.
    """
    low = sqrt(max(w_lower(profile, l), 0.0)) * sqrt(max(w_lower(profile, l_star), 0.0))
    scale = profile.varpi[0] ** profile.n * profile.block_size
    up = max(scale * prod(l), scale * prod(l_star))
    return SingularValueBounds(low, up)


def erc_terms(ensemble, support, residual, s):
    """Return ``(z, operator_norm, psi)`` for the exact recovery condition."""
    mats, struct = ensemble.matrices, ensemble.structure
    op = build_cascading(mats, struct, support).matrix
    if op.shape[1] == 0 or np.linalg.matrix_rank(op) < op.shape[1]:
        raise RankDeficiencyError("stacked operator on the support is rank deficient")
    r = np.asarray(residual)
    inside = [block_correlation(r, mats, struct, tup) for tup in support]
    total = float(np.linalg.norm(op.T @ vectorize(r)))
    z = 1.0 if max(inside) == 0 else total / max(inside)
    outside = [(block_correlation(r, mats, struct, tup), tup) for tup in struct.tuples() if tup not in support]
    outside.sort(key=lambda pair: -pair[0])  # stable: ties keep lexicographic order
    psi = [tup for _, tup in outside[:s]]
    if not psi:
        return z, 0.0, psi
    other = build_cascading(mats, struct, psi).matrix
    coupling = np.linalg.lstsq(op, other, rcond=None)[0]
    return z, float(np.linalg.norm(coupling, 2)), psi


def check_erc(ensemble, support, residual, s):
    """Margin of the exact recovery condition; positive means it holds."""
    z, norm, _ = erc_terms(ensemble, support, residual, s)
    return 1.0 - z / sqrt(s) * norm


def _sparsity_terms(profile):
    n = profile.n
    bs = profile.block_size
    b = profile.varpi[0] ** n * bs
    a = 1.0 - (bs - 1) * profile.tau[0] ** n
    return a, b


def cardano_cap(s, delta):
    """Square of the positive root of ``u^3 + sqrt(s) u^2 + delta``, delta < 0."""
    rs = sqrt(s)
    p = -s / 3.0
    q = (27.0 * delta + 2.0 * s ** 1.5) / 27.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc >= 0:
        root = np.cbrt(-q / 2.0 + sqrt(disc)) + np.cbrt(-q / 2.0 - sqrt(disc))
    else:
        # three real roots: trigonometric form, the largest is the positive one
        m = 2.0 * sqrt(-p / 3.0)
        phi = np.arccos(3.0 * q / (p * m))
        root = m * np.cos(phi / 3.0)
    u = root - rs / 3.0
    return float(u * u)


def reconstructible_sparsity(profile, s, z_mode="least"):
    """Largest block sparsity (real valued) admitted by the sufficient condition.

    ``z_mode`` is ``"least"`` (Z = 1), ``"most"`` (Z = sqrt(k), solved in
    closed form) or an explicit float Z.
    """
    a, b = _sparsity_terms(profile)
    if b == 0:
        return INF
    if z_mode == "most":
        delta = -sqrt(s) * (a + b) / b
        return cardano_cap(s, delta)
    z = 1.0 if z_mode == "least" else float(z_mode)
    return sqrt(s) * (a + b) / ((z + sqrt(s)) * b)


def mixed_norm_caps(profile, theta):
    """Two caps obtained through the block mixed norm bound: (least, most)."""
    a, b = _sparsity_terms(profile)
    if b == 0:
        return Bound(INF), Bound(INF)
    inner = 1.25 - ((1.0 - a) - 1.0) / b
    least = Bound((-0.5 + sqrt(inner)) ** 2) if inner >= 0 else Bound(float("nan"), ["negative radicand"])
    denom = 2.0 + 2.0 / b - theta
    if theta <= 0 or denom <= 0:
        most = Bound(float("nan"), ["theta outside (0, 2 + 2/B)"])
    else:
        most = Bound(((a / b) ** 2 + 1.0 + 2.0 / b) / denom)
    return least, most


def residual_decay_factor(profile, k, s, shadow, l):
    """Per-iteration contraction of the squared residual in noiseless runs."""
    n = profile.n
    violated = []
    if w_lower(profile, per_mode_counts(shadow, s * k, n)) <= 0:
        violated.append("W_lower(shadow + s*k) <= 0")
    c = per_mode_counts(shadow, s * l, n)
    lo, up = w_lower(profile, c), w_upper(profile, c)
    factor = 1.0 - s * lo / (k * sqrt(up) * w_upper(profile, s))
    return Bound(factor, violated)


def residual_envelope(profile, k, s, shadow, y_norm_sq, iterations):
    """Upper bounds on ``||R^{l+1}||^2`` for ``l = 0 .. iterations-1``."""
    out = []
    for l in range(iterations):
        f = residual_decay_factor(profile, k, s, shadow, l)
        out.append(Bound(max(f.value, 0.0) ** (l + 1) * y_norm_sq, f.violated))
    return out


def error_bound_at_stop(profile, k, s, l_star, shadow, eps, noise_norm):
    n = profile.n
    a = per_mode_counts(shadow, k, n)
    b = per_mode_counts(shadow, s * l_star, n)
    la, ua, lb = w_lower(profile, a), w_upper(profile, a), w_lower(profile, b)
    violated = []
    if la <= 0:
        violated.append("W_lower(shadow + k) <= 0")
    if lb <= 0:
        violated.append("W_lower(shadow + s*l_star) <= 0")
    if violated:
        return Bound(float("nan"), violated)
    den = sqrt(la) * sqrt(lb)
    return Bound((2 * sqrt(ua) * eps + 2 * (sqrt(ua) + sqrt(lb)) * noise_norm) / den)


def simplified_error_bound(profile, k, s, noise_norm, layout="aligned"):
    """Simplified error cap for aligned (all blocks along one mode) or scattered supports."""
    n = profile.n
    if layout == "aligned":
        counts = [(s + 1) * k] + [s * k + 1] * (n - 1)
    else:
        counts = [(s + 1) * k] * n
    lo = w_lower(profile, counts)
    if lo <= 0:
        return Bound(float("nan"), ["W_lower <= 0"])
    return Bound(2 * sqrt(10) * noise_norm / lo)


def _db(power_ratio):
    return INF if power_ratio == INF else 10.0 * log10(power_ratio)


def asymptotic_snr_threshold_db(k, s, mar):
    if mar <= 0:
        return INF
    return _db(((1.0 / sqrt(s) + 1.0) * k / mar) ** 2)


def snr_threshold(profile, k, s, shadow, mar):
    """SNR (dB) above which all support blocks are found within k iterations.

    Returns ``(exact, asymptotic)``; ``exact`` is a :class:`Bound`.
    """
    n = profile.n
    bs = profile.block_size
    violated = []
    l_ks = w_lower(profile, k * s)
    l_kn = w_lower(profile, [k] * n)
    if l_ks <= 0:
        violated.append("W_lower(k*s) <= 0")
    if l_kn <= 0:
        violated.append("W_lower(k^n) <= 0")
    asym = asymptotic_snr_threshold_db(k, s, mar)
    if violated:
        return Bound(INF, violated), asym
    u_s, u_ks = w_upper(profile, s), w_upper(profile, k * s)
    if n == 1:
        u_k = w_upper(profile, k)
        vp = profile.varpi[0] * bs
        inner = sqrt(s / k) * sqrt(l_ks) * sqrt(l_kn) - k * vp - (k * s * vp) ** 2 / l_ks
    else:
        u_k = w_upper(profile, list(shadow) if np.ndim(shadow) else shadow)
        v = profile.varpi[n - 1]
        inner = (sqrt(s / k) * sqrt(l_ks) * sqrt(l_kn) - k ** n * v ** n * bs
                 - k ** (n + 1) * s * v ** (2 * n) * bs ** 2 / l_ks)
    num = (sqrt(k) * sqrt(u_s) * sqrt(u_k) + sqrt(k * s) * sqrt(u_ks) * sqrt(u_k)) ** 2
    den = inner * mar
    if den <= 0:
        return Bound(INF, ["no guarantee: nonpositive denominator"]), asym
    return Bound(_db(num / den ** 2)), asym


def error_bound_all_found(profile, k, s, shadow, noise_norm):
    """Error cap when every support block is found within k iterations."""
    n = profile.n
    if s == 1:
        lo = w_lower(profile, k)
        if lo <= 0:
            return Bound(float("nan"), ["W_lower(k) <= 0"])
        return Bound(noise_norm / sqrt(lo))
    a = per_mode_counts(shadow, k, n)
    la, ua = w_lower(profile, a), w_upper(profile, a)
    l_ks = w_lower(profile, k * s)
    violated = []
    if l_ks <= 0:
        violated.append("W_lower(k*s) <= 0")
    if la <= 0:
        violated.append("W_lower(shadow + k) <= 0")
    if violated:
        return Bound(float("nan"), violated)
    return Bound((1 + sqrt(ua) / sqrt(l_ks)) * 2 * noise_norm / sqrt(la))


def select_alpha(k, s):
    """Smallest integer x in the admissible range meeting its ratio test, else 1."""
    top = max(0, ceil(log(e * k / s))) + 1
    for x in range(1, top + 1):
        if x <= exp(x - 2) * s * (e - 1) / (exp(x - 1) - 1 + (e - 1) * x):
            return x
    return 1


@dataclass
class XiResult:
    xi: Bound
    xi_star: Bound
    alpha: int
    alpha_star: int


def _xi_formula(first, w_k, beta, gamma):
    tail = sqrt((1 + 1 / gamma) / (1 - beta))
    ratio = first / w_k
    if ratio >= 1:
        return float("nan"), ["leading term not below W_lower(k)"]
    val = sqrt(first) * (1 + tail) / sqrt(w_k) / (1 - sqrt(ratio)) + tail
    return val, []


def xi_bounds(profile, k, s, l=0, theta=None, eta=None, gamma=1.0, alpha=None):
    """Residual-to-noise ratios reached after the remaining support is exhausted.

    ``theta`` is the number of support blocks still missing after ``l``
    iterations (default ``k``). ``eta`` defaults to the value that makes
    ``eta * beta = 1/e``. ``alpha`` overrides the automatic integer choice.
    """
    n = profile.n
    theta = k if theta is None else theta
    u_s = w_upper(profile, s)
    w_k = w_lower(profile, k)
    u_tn = w_upper(profile, [theta] * n)

    # general form
    a_gen = select_alpha(theta, s) if alpha is None else alpha
    violated = []
    if gamma <= 0:
        violated.append("gamma <= 0")
    lo_a = w_lower(profile, s * l + s + theta)
    lo_b = w_lower(profile, s * l + s * theta + theta)
    for name, val in (("W_lower(k)", w_k), ("W_lower(s*l+s+theta)", lo_a), ("W_lower(s*l+s*theta+theta)", lo_b)):
        if val <= 0:
            violated.append(f"{name} <= 0")
    beta = exp(-a_gen * lo_b / u_s)
    eta_g = 1.0 / (e * beta) if eta is None else eta
    if eta_g * beta >= 1:
        violated.append("eta*beta >= 1")
    if violated:
        xi = Bound(float("nan"), violated)
    else:
        omega = max(1 / (eta_g * (1 - eta_g * beta)), 1 - lo_a / u_s)
        first = omega * (1 + gamma) * u_tn + lo_a / u_s * (1 + gamma) * u_tn / eta_g
        val, bad = _xi_formula(first, w_k, beta, gamma)
        xi = Bound(val, bad)

    # closed form at l = 0, theta = k
    a_star = select_alpha(k, s) if alpha is None else alpha
    violated = []
    if gamma <= 0:
        violated.append("gamma <= 0")
    lo_sk = w_lower(profile, s * k + k)
    if lo_sk <= 0:
        violated.append("W_lower(s*k+k) <= 0")
    if w_k <= 0:
        violated.append("W_lower(k) <= 0")
    if violated:
        xs = Bound(float("nan"), violated)
    else:
        beta = exp(-a_star * lo_sk / u_s)
        eta_s = exp(a_star * lo_sk / u_s) / e
        u_kn = w_upper(profile, [k] * n)
        first = (1 + gamma) * u_kn / (eta_s * (1 - 1 / e)) + w_lower(profile, s + k) / u_s * (1 + gamma) * u_kn / eta_s
        val, bad = _xi_formula(first, w_k, beta, gamma)
        xs = Bound(val, bad)
    return XiResult(xi, xs, a_gen, a_star)


def error_bound_from_residual(profile, k, s, shadow, noise_norm, xi_star):
    n = profile.n
    violated = []
    if w_lower(profile, s * k + k) <= 0:
        violated.append("W_lower(s*k+k) <= 0")
    a = per_mode_counts(shadow, k, n)
    b = per_mode_counts(shadow, k * s, n)
    la, ua, lb = w_lower(profile, a), w_upper(profile, a), w_lower(profile, b)
    if la <= 0 or lb <= 0:
        violated.append("W_lower(shadow + k) or W_lower(shadow + k*s) <= 0")
    if violated or not np.isfinite(xi_star):
        return Bound(float("nan"), violated or ["xi_star not finite"])
    return Bound(2 * ((xi_star + 1) * sqrt(ua) / sqrt(lb) + 1) / sqrt(la) * noise_norm)


@dataclass
class BoundReport:
    """Named guarantees for one configuration; ``inputs`` echoes the arguments."""

    inputs: dict
    results: dict

    def row(self, prefix="bound_"):
        out = {}
        for name, val in self.results.items():
            if isinstance(val, Bound):
                out[prefix + name] = val.value
                out[prefix + name + "_ok"] = int(val.ok)
            else:
                out[prefix + name] = val
        return out

    def to_csv(self):
        row = self.row()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()

    def lines(self):
        out = [f"{key}: {val}" for key, val in self.inputs.items()]
        for name, val in self.results.items():
            if isinstance(val, Bound):
                tag = "" if val.ok else "  [premise violated: " + "; ".join(val.violated) + "]"
                out.append(f"{name}: {val.value:.6g}{tag}")
            else:
                out.append(f"{name}: {val:.6g}")
        return out


def bound_report(profile, k, s, shadow=None, noise_norm=0.0, mar=1.0, gamma=1.0, theta=1.0):
    """Evaluate every guarantee for block sparsity ``k`` and selection count ``s``."""
    n = profile.n
    shadow = [k] * n if shadow is None else shadow
    least, most = mixed_norm_caps(profile, theta)
    exact_db, asym_db = snr_threshold(profile, k, s, shadow, mar)
    xi = xi_bounds(profile, k, s, gamma=gamma)
    res = {
        "sparsity_cap_least": reconstructible_sparsity(profile, s, "least"),
        "sparsity_cap_most": reconstructible_sparsity(profile, s, "most"),
        "mixed_norm_cap_least": least,
        "mixed_norm_cap_most": most,
        "decay_factor": residual_decay_factor(profile, k, s, shadow, 0),
        "error_cap_stop": error_bound_at_stop(profile, k, s, k, shadow, noise_norm, noise_norm),
        "snr_db_exact": exact_db,
        "snr_db_asymptotic": asym_db,
        "error_cap_found": error_bound_all_found(profile, k, s, shadow, noise_norm),
        "xi": xi.xi,
        "xi_star": xi.xi_star,
        "error_cap_residual": error_bound_from_residual(profile, k, s, shadow, noise_norm, xi.xi_star.value),
    }
    inputs = {"k": k, "s": s, "shadow": list(shadow) if np.ndim(shadow) else shadow,
              "noise_norm": noise_norm, "mar": mar, "gamma": gamma, "theta": theta,
              "alpha": xi.alpha_star, "varpi": [float(v) for v in profile.varpi],
              "tau": [float(v) for v in profile.tau], "d": list(profile.d)}
    return BoundReport(inputs, res)
