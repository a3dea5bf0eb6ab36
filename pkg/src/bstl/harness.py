"""Monte Carlo experiment runner: configs, metrics, parallel trials and CSV."""

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from itertools import product
from math import prod
from pathlib import Path

import numpy as np
import yaml

from .bounds import bound_report
from .coherence import coherence_profile, mar
from .datagen import EnsembleSpec, SignalSpec, add_noise, gen_ensemble, gen_signal, stream
from .exceptions import ConfigError
from .recovery import VARIANTS, run_variant
from .tensor import BlockStructure, BlockSupport

COLUMNS = ["algorithm", "k", "d_prod", "M_prod", "N_prod", "snr_db", "trials", "err", "false_alarm", "nmse"]
EXACT_RTOL = 1e-5
PRESETS = ("3a", "3b", "3c", "3d", "4a", "4b", "5a", "5b", "6a", "6b")


def _as_mask(support):
    return support.mask() if isinstance(support, BlockSupport) else np.asarray(support, dtype=bool)


def exact_match(x_hat, x_true, support_hat, support_true):
    """Same support and relative coefficient error at most 1e-5."""
    x_hat, x_true = np.asarray(x_hat), np.asarray(x_true)
    if x_hat.shape != x_true.shape:
        raise ValueError("estimate and truth differ in shape")
    if not np.array_equal(_as_mask(support_hat), _as_mask(support_true)):
        return False
    return bool(np.linalg.norm(x_hat - x_true) <= EXACT_RTOL * np.linalg.norm(x_true))


def false_alarm_ratio(support_hat, support_true):
    """Share of estimated scalar positions that are outside the true support.

    Accepts two block supports or two boolean masks of equal cardinality.
    """
    hat, true = _as_mask(support_hat), _as_mask(support_true)
    if hat.sum() != true.sum():
        raise ValueError("supports differ in cardinality")
    return float(np.sum(hat & ~true) / true.sum())


def miss_detection_ratio(support_hat, support_true):
    hat, true = _as_mask(support_hat), _as_mask(support_true)
    return float(np.sum(true & ~hat) / true.sum())


def nmse(x_hat, x_true):
    x_hat, x_true = np.asarray(x_hat), np.asarray(x_true)
    den = float(np.sum(x_true * x_true))
    if den == 0:
        raise ValueError("NMSE undefined for a zero tensor")
    return float(np.sum((x_hat - x_true) ** 2) / den)


@dataclass
class AlgorithmSpec:
    name: str
    s: int = 1

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ConfigError(f"unknown algorithm {self.name!r}")
        if self.s < 1:
            raise ConfigError("selection count must be positive")

    @property
    def label(self):
        return f"{self.name}(s={self.s})" if self.name in ("t-gbomp", "t-gomp") else self.name


@dataclass
class ExperimentSpec:
    """One sweep: measurement splits x block sparsities x SNRs, for each algorithm."""

    N: tuple
    d: tuple
    M: list
    k: list
    algorithms: list
    style: str = "gaussian"
    family: str = "gaussian"
    snr_db: list = field(default_factory=lambda: [None])
    trials: int = 200
    seed: int = 0
    bounds: bool = False
    name: str = "experiment"
    output: str = None

    def __post_init__(self):
        try:
            self.structure = BlockStructure.from_shape(self.N, self.d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.M or not self.k or not self.algorithms or not self.snr_db:
            raise ConfigError("grids must be nonempty")
        for m in self.M:
            EnsembleSpec(m, self.structure, self.style)
        for k in self.k:
            SignalSpec(self.structure, k, self.family)

    @classmethod
    def from_dict(cls, tree):
        if not isinstance(tree, dict):
            raise ConfigError("experiment config must be a mapping")
        try:
            ens, sig = tree["ensemble"], tree["signal"]
            m = ens["M"]
            m = [m] if np.ndim(m) == 1 else m
            snr = tree.get("snr_db")
            snr = [None] if snr is None else ([snr] if np.ndim(snr) == 0 else list(snr))
            k = sig["k"]
            k = [k] if np.ndim(k) == 0 else list(k)
            algs = [AlgorithmSpec(a["name"], int(a.get("s", 1))) for a in tree["algorithms"]]
            return cls(
                N=tuple(ens["N"]), d=tuple(ens["d"]), M=[tuple(v) for v in m], k=[int(v) for v in k],
                algorithms=algs, style=ens.get("style", "gaussian"), family=sig.get("family", "gaussian"),
                snr_db=[None if v is None else float(v) for v in snr], trials=int(tree.get("trials", 200)),
                seed=int(tree.get("seed", 0)), bounds=bool(tree.get("bounds", False)),
                name=str(tree.get("name", "experiment")), output=tree.get("output"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def load(cls, path):
        try:
            tree = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(tree)

    def points(self):
        return list(product(self.M, self.k, self.snr_db))


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    text = resources.files("bstl").joinpath("presets", f"fig{name}.yaml").read_text()
    return ExperimentSpec.from_dict(yaml.safe_load(text))


@dataclass
class AggregateMetrics:
    algorithm: str
    k: int
    d_prod: int
    M_prod: int
    N_prod: int
    snr_db: float
    trials: int
    err: float
    false_alarm: float
    nmse: float
    failures: int = 0
    invariant_violations: int = 0
    bounds: dict = field(default_factory=dict)

    def row(self):
        out = {c: getattr(self, c) for c in COLUMNS}
        out.update(self.bounds)
        return out


def _trial_data(spec, point_index, trial):
    m, k, snr = spec.points()[point_index]
    ens = gen_ensemble(EnsembleSpec(m, spec.structure, spec.style), stream(spec.seed, point_index, trial, "ensemble"))
    x, support = gen_signal(SignalSpec(spec.structure, k, spec.family), stream(spec.seed, point_index, trial, "signal"))
    y = ens.apply(x)
    noise = np.zeros_like(y)
    if snr is not None:
        y, noise = add_noise(y, snr, stream(spec.seed, point_index, trial, "noise"))
    return ens, x, support, y, noise


def run_trial(spec, point_index, trial):
    """Outcome of every algorithm on one generated instance, as a list of dicts."""
    ens, x, support, y, _ = _trial_data(spec, point_index, trial)
    k = spec.points()[point_index][1]
    y_norm = float(np.linalg.norm(y))
    true_mask = support.mask()
    out = []
    for alg in spec.algorithms:
        try:
            res = run_variant(alg.name, y, ens, k, s=alg.s)
        except (ValueError, np.linalg.LinAlgError):
            out.append({"failed": True, "err": 0.0, "false_alarm": 1.0, "nmse": 1.0, "violations": 0})
            continue
        norms = np.asarray(res.residual_norms)
        monotone = bool(np.all(np.diff(norms) <= 1e-12 * max(y_norm, 1.0)))
        orthogonal = bool(max(res.orthogonality, default=0.0) <= 1e-8 * y_norm)
        if res.mask.sum() == true_mask.sum():
            fa = false_alarm_ratio(res.mask, true_mask)
        else:
            fa = miss_detection_ratio(res.mask, true_mask)
        out.append({
            "failed": False,
            "err": float(exact_match(res.estimate, x, res.mask, true_mask)),
            "false_alarm": fa,
            "nmse": nmse(res.estimate, x),
            "violations": int(not monotone) + int(not orthogonal),
        })
    return out


def _run_chunk(args):
    spec, point_index, trials = args
    return point_index, [run_trial(spec, point_index, t) for t in trials]


def worker_count():
    cap = os.environ.get("BSTL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError("BSTL_THREADS must be an integer") from exc
    return n


def _point_bounds(spec, point_index, alg):
    ens, x, support, y, noise = _trial_data(spec, point_index, 0)
    k = spec.points()[point_index][1]
    s = alg.s if alg.name in ("t-gbomp", "t-gomp") else 1
    report = bound_report(coherence_profile(ens), k, s, shadow=support.shadow(),
                          noise_norm=float(np.linalg.norm(noise)), mar=mar(x, support))
    return report.row()


def run_experiment(spec, workers=None):
    """Average every algorithm over ``spec.trials`` trials at each grid point."""
    workers = worker_count() if workers is None else workers
    n_points = len(spec.points())
    chunk = max(1, spec.trials // max(1, 4 * workers))
    jobs = [(spec, p, list(range(t, min(t + chunk, spec.trials))))
            for p in range(n_points) for t in range(0, spec.trials, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_chunk, jobs))
    else:
        done = [_run_chunk(job) for job in jobs]

    per_point = {p: [] for p in range(n_points)}
    for (p, outs), job in zip(done, jobs):
        per_point[p].extend(zip(job[2], outs))

    table = []
    for p, (m, k, snr) in enumerate(spec.points()):
        trials = [o for _, o in sorted(per_point[p], key=lambda item: item[0])]
        for a, alg in enumerate(spec.algorithms):
            recs = [t[a] for t in trials]
            row = AggregateMetrics(
                algorithm=alg.label, k=k, d_prod=spec.structure.block_size, M_prod=prod(m),
                N_prod=prod(spec.N), snr_db=float("inf") if snr is None else float(snr), trials=len(recs),
                err=float(np.mean([r["err"] for r in recs])),
                false_alarm=float(np.mean([r["false_alarm"] for r in recs])),
                nmse=float(np.mean([r["nmse"] for r in recs])),
                failures=sum(r["failed"] for r in recs),
                invariant_violations=sum(r["violations"] for r in recs),
            )
            if spec.bounds:
                row.bounds = _point_bounds(spec, p, alg)
            table.append(row)
    return table


def _cell(v):
    # repr keeps every float bit so the file parses back to the same table
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(table, path_or_file):
    fields = list(COLUMNS)
    for row in table:
        fields += [key for key in row.bounds if key not in fields]

    def emit(fh):
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow({key: _cell(v) for key, v in row.row().items()})

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def read_csv(path):
    table = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            bounds = {key: float(val) for key, val in rec.items() if key.startswith("bound_") and val != ""}
            table.append(AggregateMetrics(
                algorithm=rec["algorithm"], k=int(rec["k"]), d_prod=int(rec["d_prod"]), M_prod=int(rec["M_prod"]),
                N_prod=int(rec["N_prod"]), snr_db=float(rec["snr_db"]), trials=int(rec["trials"]),
                err=float(rec["err"]), false_alarm=float(rec["false_alarm"]), nmse=float(rec["nmse"]),
                bounds=bounds,
            ))
    return table
