"""Command-line entry point: ``cagm {fit,dp-fit,sample,evaluate,pipeline}``.

Random streams derive from one master seed: fitting uses
``SeedSequence(seed, spawn_key=(0,))``, synthetic graph ``i`` uses
``SeedSequence(seed, spawn_key=(1, i))`` and Louvain run ``j`` of the evaluation
uses ``SeedSequence(seed, spawn_key=(j,))``.

Exit codes: 0 success, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__, kernels
from .community import SearchConfig
from .evaluation import DETECTION_SEEDS, FidelityReport, ccdf_tables, census_summary, evaluate, louvain, write_ccdf_tables
from .graph import GraphFormatError, load_attributed_graph, load_partition, write_attributes, write_edges, write_partition
from .params import DEFAULT_DEGREE_CAP, DEFAULT_DELTA, CAGMParams, dp_fit, fit
from .sampler import SamplerError, sample_graph

log = logging.getLogger("cagm")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class ValidationError(Exception):
    pass


def fit_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def sample_rng(seed, i):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, i)))


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_config(path):
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys use flag names."""
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg[key.replace("-", "_")] = value
    return cfg


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def _load_graph(args):
    _require(args, "edges", "attrs")
    for path in (args.edges, args.attrs):
        if not os.path.exists(path):
            raise ValidationError(f"no such file: {path}")
    return load_attributed_graph(args.edges, args.attrs)


def _check_common(args):
    if not 0.0 < args.delta <= 1.0:
        raise ValidationError(f"--delta must lie in (0, 1], got {args.delta}")
    if args.cap < 1:
        raise ValidationError("--cap must be >= 1")
    if not 0.0 <= args.ws <= 1.0:
        raise ValidationError("--ws must lie in [0, 1]")
    if args.samples < 1:
        raise ValidationError("--samples must be >= 1")
    if args.rounds < 1 or args.fanout < 1:
        raise ValidationError("--rounds and --fanout must be >= 1")


def _manifest(args, **extra):
    d = {"seed": args.seed, "version": __version__, "backend": kernels.backend()}
    d.update(extra)
    return d


def _out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_fit(args):
    G = _load_graph(args)
    if args.partition in (None, "", "detect"):
        P = louvain(G, fit_rng(args.seed))
        source = "detect"
    else:
        if not os.path.exists(args.partition):
            raise ValidationError(f"no such file: {args.partition}")
        P = load_partition(args.partition, G.n)
        source = args.partition
    params = fit(G, P, args.delta)
    out = _out(args)
    path = os.path.join(out, "params.json")
    params.save(path)
    if source == "detect":
        write_partition(P, os.path.join(out, "partition.txt"))
    _write_json(os.path.join(out, "census.json"), census_summary(G, P))
    _write_json(os.path.join(out, "fit_manifest.json"), _manifest(args, mode="exact", partition=source,
                                                                 params_sha256=_sha256(path)))
    print(f"wrote {path}")
    return path


def _format_ledger(params):
    lines = [f"{'query':22s} {'eps':>12s} exact"]
    for name, e in params.ledger.entries:
        lines.append(f"{name:22s} {float(e):12.6g} {e}")
    total = params.ledger.total
    lines.append(f"{'total':22s} {float(total):12.6g} {total}")
    return "\n".join(lines)


def cmd_dp_fit(args):
    if args.partition not in (None, ""):
        raise ValidationError("dp-fit derives its own private partition; --partition is not accepted")
    if args.eps is None:
        raise ValidationError("--eps is required for dp-fit")
    if not (args.eps > 0 and math.isfinite(args.eps)):
        raise ValidationError(f"--eps must be a positive finite number, got {args.eps}")
    G = _load_graph(args)
    search = SearchConfig(rounds=args.rounds, fanout=args.fanout)
    params = dp_fit(G, args.eps, args.delta, args.cap, args.ws, search, fit_rng(args.seed))
    if params.ledger.total != Fraction(args.eps):
        raise RuntimeError("privacy ledger does not add up to the total budget")
    out = _out(args)
    path = os.path.join(out, "params.json")
    params.save(path)
    ledger = _format_ledger(params)
    with open(os.path.join(out, "ledger.txt"), "w") as fh:
        fh.write(ledger + "\n")
    _write_json(os.path.join(out, "fit_manifest.json"), _manifest(args, mode="dp", eps=args.eps,
                                                                 params_sha256=_sha256(path)))
    print(ledger)
    print(f"wrote {path}")
    return path


def cmd_sample(args, params_path=None):
    params_path = params_path or args.params
    if params_path is None:
        raise ValidationError("--params is required")
    if not os.path.exists(params_path):
        raise ValidationError(f"no such file: {params_path}")
    try:
        params = CAGMParams.load(params_path)
    except (KeyError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{params_path}: malformed parameter file ({exc})") from None
    out = _out(args)
    digest = _sha256(params_path)
    prefixes = []
    for i in range(args.samples):
        H, diag = sample_graph(params, sample_rng(args.seed, i), return_diagnostics=True)
        prefix = os.path.join(out, f"sample_{i}")
        write_edges(H, prefix + ".edges")
        write_attributes(H, prefix + ".attrs")
        _write_json(prefix + ".manifest.json", _manifest(
            args, index=i, spawn_key=[1, i], params_sha256=digest, edges=H.m,
            triangles=diag.triangles, triangle_target=diag.triangle_target, draws=diag.draws,
            alternations=diag.alternations, reconnect_swaps=diag.swaps, components=diag.components,
            notes=diag.notes))
        prefixes.append(prefix)
        print(f"wrote {prefix}.edges ({H.m} edges)")
    return prefixes


def _synthetic_pairs(args):
    pairs = []
    for item in args.synthetic or []:
        if os.path.isdir(item):
            names = sorted(f[:-6] for f in os.listdir(item) if f.endswith(".edges"))
            pairs.extend((os.path.join(item, nm + ".edges"), os.path.join(item, nm + ".attrs")) for nm in names)
        else:
            base = item[:-6] if item.endswith(".edges") else item
            pairs.append((base + ".edges", base + ".attrs"))
    if not pairs:
        raise ValidationError("no synthetic graphs given (--synthetic)")
    for e, a in pairs:
        for p in (e, a):
            if not os.path.exists(p):
                raise ValidationError(f"no such file: {p}")
    return pairs


def cmd_evaluate(args, synthetic=None, partition=None):
    G = _load_graph(args)
    pairs = synthetic or _synthetic_pairs(args)
    if partition is None and args.partition not in (None, "", "detect"):
        if not os.path.exists(args.partition):
            raise ValidationError(f"no such file: {args.partition}")
        partition = load_partition(args.partition, G.n)
    out = _out(args)
    rows = []
    for i, (e, a) in enumerate(pairs):
        H = load_attributed_graph(e, a)
        if H.n != G.n:
            raise ValidationError(f"{e}: {H.n} vertices, original has {G.n}")
        rows.append(evaluate(G, H, partition, DETECTION_SEEDS, args.seed))
        write_ccdf_tables(ccdf_tables(G, H), os.path.join(out, f"eval_{i}"))
    mean = FidelityReport(*np.nanmean([list(vars(r).values()) for r in rows], axis=0).tolist())
    lines = ["graph\t" + FidelityReport.header()]
    lines += [f"{os.path.basename(e)}\t{r.to_row()}" for (e, _), r in zip(pairs, rows)]
    lines.append(f"mean\t{mean.to_row()}")
    table = "\n".join(lines)
    with open(os.path.join(out, "report.tsv"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    return rows


def cmd_pipeline(args):
    if args.eps is not None:
        params_path = cmd_dp_fit(args)
    else:
        params_path = cmd_fit(args)
    prefixes = cmd_sample(args, params_path)
    # the partition is the fitted one, read back from the params file
    P = CAGMParams.load(params_path).partition
    cmd_evaluate(args, [(p + ".edges", p + ".attrs") for p in prefixes], P)


COMMANDS = {"fit": cmd_fit, "dp-fit": cmd_dp_fit, "sample": cmd_sample, "evaluate": cmd_evaluate,
            "pipeline": cmd_pipeline}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; explicit flags override it")
    common.add_argument("--edges", help="edge list, one 'u v' pair per line")
    common.add_argument("--attrs", help="0/1 attribute matrix, one row per vertex")
    common.add_argument("--partition", help="'v community' lines, or 'detect' for Louvain")
    common.add_argument("--params", help="fitted parameter file (sample)")
    common.add_argument("--synthetic", nargs="*", help="synthetic graph prefixes or directories (evaluate)")
    common.add_argument("--eps", type=float, help="total privacy budget; selects private fitting")
    common.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="cosine bucket width")
    common.add_argument("--cap", type=int, default=DEFAULT_DEGREE_CAP, help="degree cap for correlation counts")
    common.add_argument("--ws", type=float, default=0.98, help="structural weight of the community objective")
    common.add_argument("--rounds", type=int, default=SearchConfig.rounds, help="partition search rounds")
    common.add_argument("--fanout", type=int, default=SearchConfig.fanout, help="proposals per round")
    common.add_argument("--samples", type=int, default=1, help="number of synthetic graphs")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cagm", description="Community-preserving attributed graph synthesis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common])
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    if not os.path.exists(known.config):
        raise ValidationError(f"no such file: {known.config}")
    cfg = read_config(known.config)
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    explicit = {a.dest for a in sub._actions if any(opt in argv for opt in a.option_strings)}
    types = {a.dest: a.type for a in sub._actions}
    for key, raw in cfg.items():
        if key not in types:
            raise ValidationError(f"{known.config}: unknown key {key!r}")
        if key in explicit:
            continue
        conv = types[key] or str
        try:
            setattr(args, key, raw.split() if key == "synthetic" else conv(raw))
        except ValueError:
            raise ValidationError(f"{known.config}: bad value for {key}: {raw!r}") from None
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _check_common(args)
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    except (ValidationError, GraphFormatError, ValueError) as exc:
        print(f"cagm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"cagm: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INVALID
    except (SamplerError, RuntimeError, OSError) as exc:
        print(f"cagm: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
