"""Command-line interface.

Exit codes: 0 on success, 1 on a contract violation (bad input, missing
file, undefined quantity), 2 when a run completed but had to exclude
pairs or masks (partial coverage).
"""

from __future__ import annotations

import argparse
import sys

from .correlation import ScoreTable, correlation_table
from .errors import ContractError
from .harness import SEA_MEAN_COLUMN, build_report, analyze_class_improvement, \
    analyze_vis_ir_diff, count_improvements, emit_report, fuse_to_dir, \
    load_manifest, run_conventional, run_sea
from .metrics import METRIC_ORDER

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_PARTIAL = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusebench",
        description="Benchmark visible/infrared image fusion methods.")
    sub = parser.add_subparsers(dest="command", required=True)

    fuse = sub.add_parser("fuse", help="materialize a fuser method's images")
    fuse.add_argument("--manifest", required=True)
    fuse.add_argument("--method", required=True,
                      help="manifest method name or bare fuser strategy")
    fuse.add_argument("--out", required=True)
    fuse.add_argument("--threads", type=int, default=None)

    metrics = sub.add_parser("metrics", help="run the 15-metric suite")
    metrics.add_argument("--manifest", required=True)
    metrics.add_argument("--method", action="append", default=None,
                         help="restrict to these methods (repeatable)")
    metrics.add_argument("--threads", type=int, default=None)

    sea = sub.add_parser("sea", help="segmentation-based scoring")
    sea.add_argument("--manifest", required=True)
    sea.add_argument("--method", action="append", default=None)
    sea.add_argument("--threads", type=int, default=None)

    corr = sub.add_parser("correlate", help="rank metrics against SEA")
    corr.add_argument("--manifest", action="append", required=True,
                      help="dataset manifest (repeatable)")
    corr.add_argument("--variant", choices=("a", "b"), default="b")
    corr.add_argument("--include-baselines", action="store_true")
    corr.add_argument("--threads", type=int, default=None)

    analyze = sub.add_parser("analyze", help="figure-style analyses")
    analyze_sub = analyze.add_subparsers(dest="analysis", required=True)
    diff = analyze_sub.add_parser("vis-ir-diff",
                                  help="per-image mIoU, infrared minus visible")
    diff.add_argument("--manifest", required=True)
    diff.add_argument("--vis-method", default="Visible")
    diff.add_argument("--ir-method", default="Infrared")
    diff.add_argument("--threads", type=int, default=None)
    cls = analyze_sub.add_parser("class-improvement",
                                 help="per-class IoU delta vs a baseline")
    cls.add_argument("--manifest", required=True)
    cls.add_argument("--method", required=True)
    cls.add_argument("--baseline", default="Visible")
    cls.add_argument("--threads", type=int, default=None)
    cnt = analyze_sub.add_parser("improvement-count",
                                 help="methods strictly beating a baseline, per metric")
    cnt.add_argument("--scores", required=True, help="scores CSV from a report run")
    cnt.add_argument("--baseline", default="Visible")

    report = sub.add_parser("report", help="full pipeline with emitted artifacts")
    report.add_argument("--manifest", required=True)
    report.add_argument("--out", required=True)
    report.add_argument("--formats", default="csv,json,md",
                        help="comma-separated: csv, json, md")
    report.add_argument("--threads", type=int, default=None)

    return parser


def _method_names(manifest, requested):
    if not requested:
        return [m.name for m in manifest.methods]
    for name in requested:
        manifest.method(name)
    return list(requested)


def _cmd_fuse(args) -> int:
    manifest = load_manifest(args.manifest)
    written, excluded = fuse_to_dir(manifest, args.method, args.out, args.threads)
    print(f"wrote {len(written)} fused images to {args.out}")
    for line in excluded:
        print(f"excluded {line}", file=sys.stderr)
    return EXIT_PARTIAL if excluded else EXIT_OK


def _cmd_metrics(args) -> int:
    manifest = load_manifest(args.manifest)
    partial = False
    print(",".join(["method"] + list(METRIC_ORDER)))
    for name in _method_names(manifest, args.method):
        run = run_conventional(manifest, name, args.threads)
        print(",".join([name] + [repr(run.dataset_means[m]) for m in METRIC_ORDER]))
        for line in run.excluded:
            print(f"excluded metrics[{name}]: {line}", file=sys.stderr)
            partial = True
    return EXIT_PARTIAL if partial else EXIT_OK


def _cmd_sea(args) -> int:
    manifest = load_manifest(args.manifest)
    partial = False
    predictors = [p.name for p in manifest.predictors]
    print(",".join(["method"] + [f"SEA_{p}" for p in predictors] + [SEA_MEAN_COLUMN]))
    class_rows = []
    for name in _method_names(manifest, args.method):
        run = run_sea(manifest, name, args.threads)
        values = [run.score.per_predictor[p] for p in predictors] + [run.score.mean]
        print(",".join([name] + [repr(v) for v in values]))
        for predictor in predictors:
            ious = run.per_predictor_scores[predictor].per_class_iou
            class_rows.append((name, predictor, ious))
        for line in run.excluded:
            print(f"excluded sea[{name}]: {line}", file=sys.stderr)
            partial = True
    print()
    print(",".join(["method", "predictor"] + list(manifest.classes.names)))
    for name, predictor, ious in class_rows:
        print(",".join([name, predictor] + [repr(v) for v in ious]))
    return EXIT_PARTIAL if partial else EXIT_OK


def _cmd_correlate(args) -> int:
    datasets = []
    partial = False
    for manifest_path in args.manifest:
        manifest = load_manifest(manifest_path)
        report = build_report(manifest, args.threads)
        if SEA_MEAN_COLUMN not in report.score_table.columns:
            raise ContractError(
                f"dataset {manifest.name}: no predictors, cannot correlate against SEA")
        partial = partial or bool(report.notes)
        datasets.append((manifest.name, report.score_table))
    rows = correlation_table(datasets, SEA_MEAN_COLUMN, variant=args.variant,
                             include_baselines=args.include_baselines)
    metrics = list(rows[0].taus)
    print(",".join(["dataset"] + metrics + ["best"]))
    for row in rows:
        print(",".join([row.dataset] + [repr(row.taus[m]) for m in metrics]
                       + [row.best_metric]))
    return EXIT_PARTIAL if partial else EXIT_OK


def _cmd_analyze(args) -> int:
    if args.analysis == "vis-ir-diff":
        manifest = load_manifest(args.manifest)
        result = analyze_vis_ir_diff(manifest, args.vis_method, args.ir_method,
                                     args.threads)
        print("pair,miou_diff")
        for pid, value in result.diffs:
            print(f"{pid},{value!r}")
        print(f"fraction_positive,{result.fraction_positive!r}")
        for line in result.excluded:
            print(f"excluded {line}", file=sys.stderr)
        return EXIT_PARTIAL if result.excluded else EXIT_OK
    if args.analysis == "class-improvement":
        manifest = load_manifest(args.manifest)
        result = analyze_class_improvement(manifest, args.method, args.baseline,
                                           args.threads)
        print("class,iou_delta")
        for name, value in result.deltas:
            print(f"{name},{value!r}")
        for name in result.omitted:
            print(f"omitted {name}: undefined in both runs", file=sys.stderr)
        return EXIT_OK
    table = ScoreTable.from_csv(args.scores)
    counts = count_improvements(table, args.baseline)
    print("metric,count")
    for metric, count in counts.items():
        print(f"{metric},{count}")
    return EXIT_OK


def _cmd_report(args) -> int:
    manifest = load_manifest(args.manifest)
    report = build_report(manifest, args.threads)
    formats = [f for f in args.formats.split(",") if f.strip()]
    written = emit_report(report, formats, args.out)
    for path in written:
        print(f"wrote {path}")
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    return EXIT_PARTIAL if report.notes else EXIT_OK


_COMMANDS = {
    "fuse": _cmd_fuse,
    "metrics": _cmd_metrics,
    "sea": _cmd_sea,
    "correlate": _cmd_correlate,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
