"""Command-line front end.

Subcommands: ``solve`` (one AO run), ``ms-ao``, ``ms-comb-ao``, ``bench``
(the full grid against a dataset manifest), ``export-features`` (PGM tile
grid of a saved W).  Every flag can also be supplied through an
environment variable with a ``BOOLMF_`` prefix, e.g. ``BOOLMF_SEED=7``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from .ao import AoConfig, ao_bmf, ao_bmf_row_init
from .bench import (
    load_manifest,
    render_table,
    reports_to_csv,
    reports_to_json,
    run_benchmark,
)
from .combine import ms_ao, ms_comb_ao_detailed
from .initializers import InitKind, InitStrategy, init_nmf, init_random_slices
from .io import atomic_write_text, export_features, load_matrix, save_factorization
from .matrices import BinaryMatrix, FactorMeta


def _env(flag: str):
    return os.environ.get("BOOLMF_" + flag.replace("-", "_").upper())


def _add(parser: argparse.ArgumentParser, flag: str, **kwargs):
    """Add an option whose default can come from BOOLMF_<FLAG>."""
    env_val = _env(flag)
    if env_val is not None:
        kwargs["default"] = env_val  # argparse applies `type` to string defaults
        kwargs.pop("required", None)
    parser.add_argument("--" + flag, **kwargs)


def _budget_args(parser):
    _add(parser, "time-limit", type=float, default=None,
         help="wall-clock budget in seconds")
    _add(parser, "runs", type=int, default=None,
         help="fixed number of multistart runs (deterministic)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boolmf",
        description="Boolean matrix factorization: exact alternating "
                    "optimization, multistart, and optimal recombination.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one AO run from one initialization")
    p.add_argument("input", help="matrix file")
    _add(p, "rank", type=int, required=True)
    _add(p, "init", choices=["random", "nmf"], default="random")
    _add(p, "seed", type=int, default=0)
    _add(p, "max-iterations", type=int, default=50)
    _add(p, "output", default=None, help="basename for .W.txt/.H.txt/.json outputs")

    for name in ("ms-ao", "ms-comb-ao"):
        p = sub.add_parser(name, help="multistart AO" + (" + recombination" if "comb" in name else ""))
        p.add_argument("input", help="matrix file")
        _add(p, "rank", type=int, required=True)
        _budget_args(p)
        _add(p, "init", choices=["random", "nmf", "alternate"], default="alternate")
        _add(p, "seed", type=int, default=0)
        _add(p, "output", default=None, help="basename for .W.txt/.H.txt/.json outputs")

    p = sub.add_parser("bench", help="full dataset x rank benchmark grid")
    _add(p, "manifest", default="datasets/manifest.json")
    _add(p, "ranks", default="2,5,10", help="comma-separated ranks")
    _budget_args(p)
    _add(p, "algorithm", choices=["ms-ao", "ms-comb-ao"], default="ms-comb-ao")
    _add(p, "seed", type=int, default=0)
    _add(p, "format", choices=["table", "json", "csv"], default="table")
    _add(p, "output", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("export-features", help="render columns of W as a PGM tile grid")
    p.add_argument("input", help="matrix file holding W")
    _add(p, "tile", required=True, help="tile shape HxW with H*W = rows of the matrix")
    _add(p, "output", required=True, help="output .pgm path")
    p.add_argument("--binary-pgm", action="store_true", help="write P5 instead of ASCII P2")

    return parser


def _require_budget(args):
    if args.time_limit is None and args.runs is None:
        raise SystemExit("error: provide --time-limit or --runs")


def _report_dict(args, algorithm, fact, extra=None) -> dict:
    doc = {
        "algorithm": algorithm,
        "input": args.input,
        "rank": args.rank,
        "seed": args.seed,
        "time_budget": getattr(args, "time_limit", None),
        "runs_budget": getattr(args, "runs", None),
        "error": fact.error,
        "init_strategy": fact.meta.init_strategy,
        "ao_iterations": fact.meta.ao_iterations,
        "wall_time": fact.meta.wall_time,
    }
    if extra:
        doc.update(extra)
    return doc


def _emit(args, fact, doc):
    if args.output:
        paths = save_factorization(args.output, fact.W, fact.H, doc)
        print("wrote %s %s %s" % tuple(str(p) for p in paths))
    print("error=%s rank=%d" % (fact.error, fact.rank))


def _cmd_solve(args) -> int:
    X = load_matrix(args.input)
    cfg = AoConfig(max_iterations=args.max_iterations)
    meta = FactorMeta(init_strategy=args.init, seed=args.seed)
    if args.init == "nmf":
        W0 = init_nmf(X, args.rank, seed=args.seed)
        fact, _ = ao_bmf(X, W0, cfg, meta)
    else:
        side, M0 = init_random_slices(X, args.rank, args.seed)
        if side == "columns":
            fact, _ = ao_bmf(X, M0, cfg, meta)
        else:
            fact, _ = ao_bmf_row_init(X, M0, cfg, meta)
    _emit(args, fact, _report_dict(args, "solve", fact))
    return 0


def _cmd_multistart(args, with_combine: bool) -> int:
    X = load_matrix(args.input)
    _require_budget(args)
    strategy = InitStrategy(kind=InitKind(args.init), seed=args.seed)
    t0 = time.monotonic()
    if with_combine:
        fact, details = ms_comb_ao_detailed(
            X, args.rank, total_time=args.time_limit, num_runs=args.runs,
            strategy=strategy, master_seed=args.seed,
        )
        extra = {
            "ao_runs_completed": details.ao_runs_completed,
            "phase1_best_error": details.phase1_best_error,
            "combine_error": details.combine_error,
            "polish_error": details.polish_error,
            "wall_time": time.monotonic() - t0,
        }
        algorithm = "ms-comb-ao"
    else:
        fact, runs = ms_ao(
            X, args.rank, total_time=args.time_limit, num_runs=args.runs,
            strategy=strategy, master_seed=args.seed,
        )
        extra = {
            "ao_runs_completed": len(runs),
            "wall_time": time.monotonic() - t0,
        }
        algorithm = "ms-ao"
    _emit(args, fact, _report_dict(args, algorithm, fact, extra))
    return 0


def _cmd_bench(args) -> int:
    manifests = load_manifest(args.manifest)
    ranks = [int(tok) for tok in str(args.ranks).split(",") if tok.strip()]
    if ranks and (args.time_limit is None and args.runs is None):
        raise SystemExit("error: provide --time-limit or --runs")
    reports, failures = run_benchmark(
        manifests, ranks, time_budget=args.time_limit, runs_budget=args.runs,
        algorithm=args.algorithm, master_seed=args.seed,
        progress=lambda rep: print(
            "cell %s r=%d error=%s delta=%s (%.1fs)"
            % (rep.dataset, rep.rank, rep.error, rep.delta_vs_reference, rep.wall_time),
            file=sys.stderr,
        ),
    )
    if args.format == "json":
        text = reports_to_json(reports, failures)
    elif args.format == "csv":
        text = reports_to_csv(reports)
    else:
        text = render_table(reports, failures)
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 1 if failures else 0


def _cmd_export_features(args) -> int:
    W = load_matrix(args.input)
    if not isinstance(W, BinaryMatrix):
        raise SystemExit("error: feature export needs a binary matrix")
    try:
        h, w = (int(t) for t in args.tile.lower().split("x"))
    except ValueError:
        raise SystemExit("error: --tile must look like 19x19") from None
    export_features(W, (h, w), args.output, binary_format=args.binary_pgm)
    print("wrote %s" % args.output)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "ms-ao":
            return _cmd_multistart(args, with_combine=False)
        if args.command == "ms-comb-ao":
            return _cmd_multistart(args, with_combine=True)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "export-features":
            return _cmd_export_features(args)
        raise SystemExit("unknown command %r" % args.command)
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
