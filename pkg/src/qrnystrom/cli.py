"""Command line entry point: ``qrnystrom {approx,verify,time}``.

Exit status is 0 on success, 2 when a verification check fails and 1 on
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import data as data_io
from .bench import (
    ALL_METHODS,
    SUITES,
    ConfigError,
    ExperimentConfig,
    baseline_violations,
    format_summary,
    records_to_csv,
    run_experiment,
    run_timing,
    run_verification,
    summarize,
    timing_csv,
    timing_ratios,
)
from .kernels import DEFAULT_DENSE_CAP, DegenerateData, MemoryBudgetError
from .linalg import DEFAULT_REL_TOL

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2

log = logging.getLogger("qrnystrom")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple:
    """``"2,4,6"`` or a range ``"2..10"`` (inclusive) or ``"2..10:2"``."""
    try:
        if ".." in text:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            return tuple(range(int(lo), int(hi) + 1, int(step) if step else 1))
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None


def _name_list(choices):
    def parse(text: str) -> tuple:
        items = tuple(t.strip() for t in text.split(",") if t.strip())
        bad = [t for t in items if t not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {','.join(choices)}; got {text!r}")
        return items
    return parse


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH", help="LIBSVM data file")
    src.add_argument("--fixture", choices=data_io.fixture_names(), help="small built-in kernel matrix")
    src.add_argument("--synthetic", choices=sorted(data_io.SYNTHETIC_SPECS),
                     help="synthetic stand-in shaped like a LIBSVM dataset")
    p.add_argument("--subsample", type=int, metavar="N", help="uniform subsample size")
    p.add_argument("--n-features", type=int, metavar="P", help="declared dimension for --data")
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP, help="max n for dense n x n matrices")


def _add_experiment(p: argparse.ArgumentParser) -> None:
    _add_source(p)
    p.add_argument("--rank", type=int, default=2, metavar="R")
    p.add_argument("--m-grid", type=_int_list, metavar="LIST", help="landmark counts, default R,2R,..,5R")
    p.add_argument("--trials", type=int, default=50, metavar="T")
    p.add_argument("--selection", type=_name_list(("uniform", "kmeans")), default=("uniform",),
                   help="uniform, kmeans or both (comma separated)")
    p.add_argument("--columns", type=_int_list, metavar="LIST",
                   help="fixed 0-based in-sample columns instead of random selection")
    p.add_argument("--methods", type=_name_list(ALL_METHODS), default=ALL_METHODS, metavar="LIST")
    p.add_argument("--norms", type=_name_list(("trace", "frobenius", "spectral")),
                   default=("trace", "frobenius"), metavar="LIST")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--pinv-tol", type=float, default=DEFAULT_REL_TOL, metavar="X")
    p.add_argument("--kmeans-iter", type=int, default=10)
    p.add_argument("--out", metavar="CSV_PATH", help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrnystrom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    approx = sub.add_parser("approx", help="relative approximation errors per method, m and trial")
    _add_experiment(approx)
    approx.add_argument("--summary-out", metavar="CSV_PATH", help="write mean/std summary CSV")
    approx.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")

    verify = sub.add_parser("verify", help="property suites for the trace-norm guarantees")
    _add_experiment(verify)
    verify.add_argument("--suite", choices=SUITES, required=True)
    verify.add_argument("--instances", type=int, default=500)
    verify.set_defaults(selection=None)

    timing = sub.add_parser("time", help="factorization wall time per method and m")
    _add_experiment(timing)
    timing.add_argument("--repeats", type=int, default=3)
    return parser


def config_from_args(args) -> ExperimentConfig:
    selections = args.selection or ("uniform",)
    return ExperimentConfig(
        data=args.data, fixture=args.fixture, synthetic=args.synthetic,
        subsample=args.subsample, n_features=args.n_features, rank=args.rank,
        m_grid=args.m_grid, trials=args.trials, selections=tuple(selections),
        methods=tuple(args.methods), norms=tuple(args.norms), seed=args.seed,
        pinv_tol=args.pinv_tol, dense_cap=args.dense_cap, columns=args.columns,
        kmeans_iter=args.kmeans_iter,
    )


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_approx(args) -> int:
    cfg = config_from_args(args)
    records = run_experiment(cfg)
    _emit(records_to_csv(records, cfg.norms, timing=not args.no_timing), args.out)
    rows = summarize(records, cfg.norms)
    if args.summary_out:
        lines = ["method,selection,m,norm,mean,std,trials"]
        lines += [f"{r.method},{r.selection},{r.m},{r.norm},{r.mean:.10g},{r.std:.10g},{r.trials}" for r in rows]
        Path(args.summary_out).write_text("\n".join(lines) + "\n")
    print(format_summary(rows), file=sys.stderr)
    bad = baseline_violations(records, cfg.norms)
    if bad:
        for rec, nm, ref in bad[:10]:
            print(f"baseline violated: {rec.method} {rec.selection} m={rec.m} trial={rec.trial} "
                  f"{nm}: {rec.rel_error[nm]:.6g} < evd {ref:.6g}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args) -> int:
    has_source = any(v is not None for v in (args.data, args.fixture, args.synthetic))
    cfg = None
    if args.suite == "thm3" and has_source:
        if args.m_grid is None:
            args.m_grid = tuple(range(2, 11))
        cfg = config_from_args(args)
    selection = (args.selection or ("kmeans",))[0]
    report = run_verification(args.suite, args.instances, args.seed, selection=selection, cfg=cfg)
    _emit(report.to_csv(), args.out)
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_time(args) -> int:
    cfg = config_from_args(args)
    rows = run_timing(cfg, repeats=args.repeats)
    _emit(timing_csv(rows), args.out)
    for (sel, m), ratio in sorted(timing_ratios(rows).items()):
        print(f"{sel} m={m}: modified/standard time ratio {ratio:.3f}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"approx": cmd_approx, "verify": cmd_verify, "time": cmd_time}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DegenerateData, MemoryBudgetError, KeyError, OSError, ValueError) as exc:
        print(f"qrnystrom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
