"""Command line front end.

Subcommands::

    bstl coherence A1.txt A2.txt A3.txt [--d 2 2 1]
    bstl bounds config.yaml [--csv]
    bstl recover y.txt A1.txt A2.txt A3.txt --k 2 [--s 2] [--d 2 2 1] [--eps E] [--out x.txt]
    bstl simulate experiment.yaml [--out table.csv] [--workers W]
    bstl figure 3a [--trials N] [--seed S] [--out table.csv]

Matrix files hold ``rows cols`` on the first line and then the entries row by
row (commas or whitespace). Files ending in ``.bin`` hold two little-endian
int64 values ``rows cols`` and then float64 entries column by column. Tensor
files hold ``n N_1 ... N_n`` and then the entries with the first index
running fastest.

A bounds config is a YAML mapping. Coherences come either from
``profile: {varpi: ..., tau: ..., d: [...]}`` (scalars or one value per
shared-mode count) or from ``matrices: [files]`` plus ``d: [...]``. The other
keys are ``k``, ``s`` and optionally ``shadow``, ``noise_norm``, ``mar``,
``gamma`` and ``theta``.

Exit status: 0 on success, 1 for bad usage, 2 for an invalid config or
input file, 3 for a numerical failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from .bounds import bound_report
from .coherence import CoherenceProfile, coherence_profile, matrix_coherence
from .ensemble import MeasurementEnsemble
from .exceptions import ConfigError
from .harness import PRESETS, ExperimentSpec, load_preset, run_experiment, write_csv
from .io import read_matrix, read_tensor, write_tensor
from .recovery import VARIANTS, run_variant

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ensemble(paths, d):
    mats = [read_matrix(p) for p in paths]
    if d is not None and len(d) != len(mats):
        raise ConfigError(f"--d needs {len(mats)} values, got {len(d)}")
    return MeasurementEnsemble.normalized(mats, d=d)


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_coherence(args, out):
    ens = _ensemble(args.matrices, args.d)
    prof = coherence_profile(ens)
    print(f"matrix_coherence: {_fmt([matrix_coherence(m) for m in ens.matrices])}", file=out)
    for key, val in prof.as_dict().items():
        print(f"{key}: {_fmt(val)}", file=out)
    return EXIT_OK


def _load_yaml(path):
    try:
        tree = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return tree


def cmd_bounds(args, out):
    tree = _load_yaml(args.config)
    if "profile" in tree:
        p = tree["profile"]
        try:
            prof = CoherenceProfile.from_values(p["varpi"], p["tau"], p["d"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"profile needs varpi, tau and d: {exc}") from exc
    elif "matrices" in tree:
        base = Path(args.config).parent
        prof = coherence_profile(_ensemble([base / f for f in tree["matrices"]], tree.get("d")))
    else:
        raise ConfigError("bounds config needs a 'profile' or 'matrices' entry")
    try:
        k, s = int(tree["k"]), int(tree.get("s", 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bounds config needs integer k and s: {exc}") from exc
    opts = {key: tree[key] for key in ("shadow", "noise_norm", "mar", "gamma", "theta") if key in tree}
    report = bound_report(prof, k, s, **opts)
    if args.csv:
        out.write(report.to_csv())
    else:
        print("\n".join(report.lines()), file=out)
    return EXIT_OK


def cmd_recover(args, out):
    y = read_tensor(args.y)
    ens = _ensemble(args.matrices, args.d)
    res = run_variant(args.variant, y, ens, args.k, s=args.s, eps=args.eps)
    print(f"iterations: {res.iterations}", file=out)
    print(f"residual_norm: {res.residual_norm:.6g}", file=out)
    print(f"rank_deficient: {res.rank_deficient}", file=out)
    if args.variant in ("t-gbomp", "t-bomp"):
        print("support: " + "; ".join(" ".join(str(i) for i in t) for t in res.support.sorted()), file=out)
    else:
        print(f"nonzeros: {int(np.count_nonzero(res.mask))}", file=out)
    if args.out:
        write_tensor(args.out, res.estimate)
    return EXIT_OK


def _emit(table, target, out):
    write_csv(table, target if target else out)


def cmd_simulate(args, out):
    spec = ExperimentSpec.load(args.config)
    _override(spec, args)
    table = run_experiment(spec, workers=args.workers)
    _emit(table, args.out or spec.output, out)
    return EXIT_OK


def cmd_figure(args, out):
    spec = load_preset(args.name)
    _override(spec, args)
    table = run_experiment(spec, workers=args.workers)
    _emit(table, args.out, out)
    return EXIT_OK


def _override(spec, args):
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be at least 1")
        spec.trials = args.trials
    if args.seed is not None:
        spec.seed = args.seed


def build_parser():
    p = _Parser(prog="bstl", description="Block-sparse tensor recovery toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("coherence", help="coherence profile of a set of matrices")
    c.add_argument("matrices", nargs="+")
    c.add_argument("--d", type=int, nargs="+", help="block length per mode")
    c.set_defaults(func=cmd_coherence)

    b = sub.add_parser("bounds", help="evaluate recovery guarantees")
    b.add_argument("config")
    b.add_argument("--csv", action="store_true")
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("recover", help="recover a block-sparse tensor")
    r.add_argument("y")
    r.add_argument("matrices", nargs="+")
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--s", type=int, default=1)
    r.add_argument("--d", type=int, nargs="+")
    r.add_argument("--eps", type=float)
    r.add_argument("--variant", default="t-gbomp", choices=VARIANTS)
    r.add_argument("--out")
    r.set_defaults(func=cmd_recover)

    for name, func in (("simulate", cmd_simulate), ("figure", cmd_figure)):
        f = sub.add_parser(name, help="run an experiment" if name == "simulate" else "run a figure preset")
        if name == "simulate":
            f.add_argument("config")
        else:
            f.add_argument("name", choices=PRESETS)
        f.add_argument("--trials", type=int)
        f.add_argument("--seed", type=int)
        f.add_argument("--workers", type=int)
        f.add_argument("--out")
        f.set_defaults(func=func)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("bstl: a subcommand is required")
        return args.func(args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"bstl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"bstl: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
