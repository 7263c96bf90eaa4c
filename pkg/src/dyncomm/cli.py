"""Command line entry point: ``dyncomm detect|synth|table``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, DyncommError, StageError
from .harness import (
    VARIANTS,
    PipelineConfig,
    SbmParams,
    emit_report,
    format_table,
    run_pipeline,
    table_rows,
    write_sbm,
)
from .temporal import SlicingSpec

log = logging.getLogger("dyncomm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dyncomm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="run the detection pipeline on an event file")
    d.add_argument("--input", required=True)
    d.add_argument("--slice-mode", choices=("prelabeled", "window"), default="prelabeled")
    d.add_argument("--window", type=float)
    d.add_argument("--origin", type=float)
    d.add_argument("--slices", type=int, help="force the slice count (keeps trailing empty slices)")
    d.add_argument("--k", type=int, help="community count; defaults to the ground-truth count")
    d.add_argument("--lambda-a", type=float, default=0.2)
    d.add_argument("--lambda-r", type=float, default=0.07)
    d.add_argument("--max-iters", type=int, default=500)
    d.add_argument("--tol", type=float, default=1e-6)
    d.add_argument("--restarts", type=int, default=10,
                   help="random starts per decomposition; the lowest-loss fit is kept")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--variant", choices=VARIANTS, default="mntd")
    d.add_argument("--weighting", choices=("binary", "count"), default="binary")
    d.add_argument("--runs", type=int, default=20)
    d.add_argument("--truth")
    d.add_argument("--zero-row-fallback", action="store_true",
                   help="put present nodes with all-zero indicator rows in community 0")
    d.add_argument("--out", required=True)

    s = sub.add_parser("synth", help="write a dynamic SBM event file and its ground truth")
    s.add_argument("--nodes", type=int, default=120)
    s.add_argument("--communities", type=int, default=4)
    s.add_argument("--slices", type=int, default=5)
    s.add_argument("--p-in", type=float, default=0.3)
    s.add_argument("--p-out", type=float, default=0.02)
    s.add_argument("--migrate", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    t = sub.add_parser("table", help="print a mean±std row per variant from summary.json files")
    t.add_argument("summaries", nargs="+")
    t.add_argument("--metric", choices=("nmi", "modularity"), default="nmi")
    return p


def _detect(args) -> int:
    config = PipelineConfig(
        input=args.input,
        out_dir=args.out,
        k=args.k,
        slicing=SlicingSpec(args.slice_mode, args.window, args.origin, args.slices),
        weighting="count-sum" if args.weighting == "count" else "binary",
        lambda_A=args.lambda_a,
        lambda_R=args.lambda_r,
        max_iters=args.max_iters,
        tol=args.tol,
        restarts=args.restarts,
        variant=args.variant,
        ground_truth=args.truth,
        runs=args.runs,
        seed=args.seed,
        zero_row_fallback=args.zero_row_fallback,
    )
    report = run_pipeline(config)
    try:
        emit_report(report, args.out)
    except OSError as exc:
        raise StageError("report", exc) from exc
    summary = report.summary()
    row = summary["table_row"]
    print(f"{row['variant']}\tmodularity {row['modularity']}\tnmi {row['nmi'] or '-'}")
    return EXIT_OK


def _synth(args) -> int:
    params = SbmParams(
        n_nodes=args.nodes,
        n_communities=args.communities,
        T=args.slices,
        p_in=args.p_in,
        p_out=args.p_out,
        migrate_fraction=args.migrate,
        seed=args.seed,
    )
    ev, gt = write_sbm(params, args.out)
    print(f"{ev}\n{gt}")
    return EXIT_OK


def _table(args) -> int:
    sys.stdout.write(format_table(table_rows(args.summaries), args.metric))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    handler = {"detect": _detect, "synth": _synth, "table": _table}[args.command]
    try:
        return handler(args)
    except StageError as exc:
        print(f"dyncomm: error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, ConfigError) or (
            exc.stage == "load" and isinstance(exc.cause, (OSError, ValueError))
        ):
            return EXIT_CONFIG
        return EXIT_RUNTIME
    except ConfigError as exc:
        print(f"dyncomm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DyncommError, ArithmeticError, OSError, KeyError, ValueError) as exc:
        print(f"dyncomm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
