"""Benchmark harness: manifest ingestion, pipeline orchestration, the
figure-style analyses, and report emission.

Pair-level work may run on a thread pool (FUSEBENCH_THREADS caps the
worker count), but every aggregation walks results in manifest order, so
reports are byte-identical regardless of parallelism. Pairs with missing
or mismatched artifacts are excluded per analysis and surfaced as
coverage lines; nothing is dropped silently.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .correlation import BASELINE_ROW_NAMES, CorrelationRow, ScoreTable, \
    correlation_table, metric_direction_adjust
from .errors import ContractError
from .fusers import FuserSpec, fuse
from .imaging import ImagePlane, load_intensity, load_mask, save_png
from .metrics import LOWER_BETTER, METRIC_ORDER, evaluate_all
from .sea import ClassSet, ConfusionMatrix, SeaScore, accumulate, \
    aggregate_predictors, compute_score

SEA_MEAN_COLUMN = "SEA_mean"

_DEFAULT_METHODS = (
    ("Visible", "visible-only"),
    ("Infrared", "infrared-only"),
    ("Average", "average"),
    ("MaxSelect", "max-select"),
    ("LaplacianPyramid", "laplacian-pyramid"),
)


def worker_count() -> int:
    """Worker cap: FUSEBENCH_THREADS if set, else available parallelism."""
    env = os.environ.get("FUSEBENCH_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ContractError(f"FUSEBENCH_THREADS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ContractError(f"FUSEBENCH_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _map_pairs(job, pairs, threads):
    """Apply job to each pair, preserving manifest order in the result."""
    workers = threads if threads is not None else worker_count()
    if workers <= 1 or len(pairs) <= 1:
        return [job(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, pairs))


# ---------------------------------------------------------------------------
# Manifest

@dataclass(frozen=True)
class ManifestPair:
    id: str
    visible_path: Path
    infrared_path: Path
    gt_mask_path: Path


@dataclass(frozen=True)
class ManifestMethod:
    name: str
    fused_dir: Path | None = None
    fuser: FuserSpec | None = None

    @property
    def provenance(self) -> str:
        if self.fused_dir is not None:
            return f"fused_dir:{self.fused_dir}"
        return f"fuser:{self.fuser.strategy}"


@dataclass(frozen=True)
class ManifestPredictor:
    name: str
    masks_dir: Path


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    classes: ClassSet
    pairs: tuple
    methods: tuple
    predictors: tuple
    root: Path
    flagged: tuple = ()

    def method(self, name: str) -> ManifestMethod:
        for m in self.methods:
            if m.name == name:
                return m
        raise ContractError(f"manifest has no method {name!r}")


def _field(obj: dict, key: str, context: str, required: bool = True, default=None):
    if key in obj:
        return obj[key]
    if required:
        raise ContractError(f"manifest {context}: missing field {key!r}")
    return default


def _parse_classes(spec, root: Path) -> ClassSet:
    if isinstance(spec, str):
        path = root / spec
        if not path.is_file():
            raise ContractError(f"manifest classes file not found: {path}")
        names = [line.strip() for line in path.read_text().splitlines() if line.strip()]
        return ClassSet(tuple(names))
    if isinstance(spec, (list, tuple)):
        return ClassSet(tuple(str(n) for n in spec))
    raise ContractError("manifest classes must be a list of names or a classes.txt path")


def _parse_fuser(spec: dict, context: str) -> FuserSpec:
    if not isinstance(spec, dict):
        raise ContractError(f"manifest {context}: fuser must be an object")
    strategy = _field(spec, "strategy", context)
    kwargs = {}
    if "weight" in spec:
        kwargs["weight"] = float(spec["weight"])
    if "depth" in spec:
        kwargs["depth"] = int(spec["depth"])
    return FuserSpec(str(strategy), **kwargs)


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a dataset manifest; relative paths resolve
    against the manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise ContractError(f"no such manifest: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ContractError(
            f"manifest parse error at {path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ContractError(f"manifest root must be a JSON object: {path}")
    root = path.parent.resolve()

    name = str(raw.get("name") or path.stem)
    classes = _parse_classes(_field(raw, "classes", "root"), root)

    pairs_raw = _field(raw, "pairs", "root")
    if not isinstance(pairs_raw, list) or not pairs_raw:
        raise ContractError("manifest pairs must be a non-empty list")
    pairs, seen, flagged = [], set(), []
    for i, entry in enumerate(pairs_raw):
        ctx = f"pairs[{i}]"
        pair_id = str(_field(entry, "id", ctx))
        if pair_id in seen:
            raise ContractError(f"duplicate pair id {pair_id!r}")
        seen.add(pair_id)
        pair = ManifestPair(
            pair_id,
            root / str(_field(entry, "visible_path", ctx)),
            root / str(_field(entry, "infrared_path", ctx)),
            root / str(_field(entry, "gt_mask_path", ctx)))
        for label, p in (("visible", pair.visible_path),
                         ("infrared", pair.infrared_path),
                         ("gt mask", pair.gt_mask_path)):
            if not p.is_file():
                flagged.append(f"pair {pair_id}: {label} file missing: {p}")
        pairs.append(pair)

    methods_raw = raw.get("methods")
    methods = []
    if methods_raw is None:
        methods = [ManifestMethod(n, fuser=FuserSpec(s)) for n, s in _DEFAULT_METHODS]
    else:
        if not isinstance(methods_raw, list) or not methods_raw:
            raise ContractError("manifest methods must be a non-empty list when present")
        for i, entry in enumerate(methods_raw):
            ctx = f"methods[{i}]"
            mname = str(_field(entry, "name", ctx))
            has_dir = "fused_dir" in entry
            has_fuser = "fuser" in entry
            if has_dir == has_fuser:
                raise ContractError(
                    f"manifest {ctx} ({mname}): exactly one of fused_dir / fuser required")
            if has_dir:
                methods.append(ManifestMethod(mname, fused_dir=root / str(entry["fused_dir"])))
            else:
                methods.append(ManifestMethod(mname, fuser=_parse_fuser(entry["fuser"], ctx)))
    if len({m.name for m in methods}) != len(methods):
        raise ContractError("manifest method names must be unique")

    predictors = []
    for i, entry in enumerate(raw.get("predictors") or []):
        ctx = f"predictors[{i}]"
        predictors.append(ManifestPredictor(
            str(_field(entry, "name", ctx)),
            root / str(_field(entry, "masks_dir", ctx))))
    if len({p.name for p in predictors}) != len(predictors):
        raise ContractError("manifest predictor names must be unique")

    return DatasetManifest(name, classes, tuple(pairs), tuple(methods),
                           tuple(predictors), root, tuple(flagged))


# ---------------------------------------------------------------------------
# Fused image resolution

def _load_pair_planes(pair: ManifestPair):
    vis = load_intensity(pair.visible_path)
    ir = load_intensity(pair.infrared_path)
    if vis.shape != ir.shape:
        raise ContractError(
            f"pair {pair.id}: visible {vis.shape} vs infrared {ir.shape} dimensions differ")
    return vis, ir


def _fused_plane(method: ManifestMethod, pair: ManifestPair,
                 vis: ImagePlane, ir: ImagePlane) -> ImagePlane:
    if method.fuser is not None:
        return fuse(method.fuser, vis, ir)
    fused_path = method.fused_dir / f"{pair.id}.png"
    if not fused_path.is_file():
        raise ContractError(f"missing fused image: {fused_path}")
    fused = load_intensity(fused_path)
    if fused.shape != vis.shape:
        raise ContractError(
            f"pair {pair.id}: fused {fused.shape} vs source {vis.shape} dimensions differ")
    return fused


def fuse_to_dir(manifest: DatasetManifest, method_name: str, out_dir,
                threads: int | None = None):
    """Materialize a fuser-backed method's images as <pair_id>.png files.

    Also accepts a bare strategy name for ad-hoc runs. Returns (written
    pair ids, exclusion notes).
    """
    try:
        method = manifest.method(method_name)
        if method.fuser is None:
            raise ContractError(
                f"method {method_name!r} reads from fused_dir; nothing to fuse")
        spec = method.fuser
    except ContractError:
        if method_name in [m.name for m in manifest.methods]:
            raise
        spec = FuserSpec(method_name)  # bare strategy name fallback
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def job(pair):
        try:
            vis, ir = _load_pair_planes(pair)
            save_png(fuse(spec, vis, ir), out_dir / f"{pair.id}.png")
            return pair.id, None
        except ContractError as exc:
            return pair.id, str(exc)

    results = _map_pairs(job, manifest.pairs, threads)
    written = [pid for pid, err in results if err is None]
    excluded = [f"pair {pid}: {err}" for pid, err in results if err is not None]
    return written, excluded


# ---------------------------------------------------------------------------
# Conventional metric runs

@dataclass(frozen=True)
class MethodRun:
    """Per-image metric values (manifest pair order) and their dataset means."""

    method: str
    provenance: str
    per_image: dict
    dataset_means: dict
    excluded: tuple = ()


def run_conventional(manifest: DatasetManifest, method_name: str,
                     threads: int | None = None) -> MethodRun:
    """Evaluate the 15-metric suite per pair and average over the dataset."""
    method = manifest.method(method_name)

    def job(pair):
        try:
            vis, ir = _load_pair_planes(pair)
            fused = _fused_plane(method, pair, vis, ir)
            values = {r.metric: r.value for r in evaluate_all(fused, vis, ir)}
            return pair.id, values, None
        except ContractError as exc:
            return pair.id, None, str(exc)

    results = _map_pairs(job, manifest.pairs, threads)
    per_image = {pid: values for pid, values, err in results if err is None}
    excluded = tuple(f"pair {pid}: {err}" for pid, _, err in results if err is not None)
    if not per_image:
        raise ContractError(
            f"method {method_name!r}: no pair could be evaluated "
            f"({'; '.join(excluded)})")
    means = {metric: sum(v[metric] for v in per_image.values()) / len(per_image)
             for metric in METRIC_ORDER}
    return MethodRun(method_name, method.provenance, per_image, means, excluded)


# ---------------------------------------------------------------------------
# SEA runs

@dataclass(frozen=True)
class SeaRun:
    """Pooled SEA result for one method: per-predictor scores, their mean,
    and mask coverage."""

    method: str
    score: SeaScore
    per_predictor_scores: dict
    coverage: dict  # predictor -> (included pairs, total pairs)
    excluded: tuple = ()


def _mask_path(predictor: ManifestPredictor, method_name: str, pair_id: str) -> Path:
    return predictor.masks_dir / method_name / f"{pair_id}.png"


def run_sea(manifest: DatasetManifest, method_name: str,
            threads: int | None = None) -> SeaRun:
    """Pool one confusion matrix per predictor over all pairs with masks,
    then average the per-predictor mIoU values."""
    if not manifest.predictors:
        raise ContractError("manifest declares no predictors; SEA needs at least one")
    manifest.method(method_name)  # validate the name
    k = len(manifest.classes)

    def job(pair):
        try:
            gt = load_mask(pair.gt_mask_path)
            gt.validate_labels(k)
        except ContractError as exc:
            return pair.id, None, str(exc)
        found = {}
        for predictor in manifest.predictors:
            path = _mask_path(predictor, method_name, pair.id)
            if not path.is_file():
                continue
            mask = load_mask(path)
            found[predictor.name] = mask
        return pair.id, (gt, found), None

    results = _map_pairs(job, manifest.pairs, threads)
    excluded = []
    matrices = {p.name: ConfusionMatrix.empty(k) for p in manifest.predictors}
    included = {p.name: 0 for p in manifest.predictors}
    for pid, payload, err in results:
        if err is not None:
            excluded.append(f"pair {pid}: {err}")
            continue
        gt, found = payload
        for predictor in manifest.predictors:
            if predictor.name not in found:
                excluded.append(f"pair {pid}: missing mask for predictor {predictor.name}")
                continue
            try:
                matrices[predictor.name] = accumulate(
                    matrices[predictor.name], found[predictor.name], gt)
                included[predictor.name] += 1
            except ContractError as exc:
                excluded.append(f"pair {pid}, predictor {predictor.name}: {exc}")

    per_predictor_scores = {}
    for predictor in manifest.predictors:
        if included[predictor.name] == 0:
            raise ContractError(
                f"method {method_name!r}: predictor {predictor.name!r} has no usable mask "
                f"({'; '.join(excluded) or 'none found'})")
        per_predictor_scores[predictor.name] = compute_score(matrices[predictor.name])

    mious = {name: s.miou for name, s in per_predictor_scores.items()}
    mean = aggregate_predictors(mious)
    per_class = _mean_per_class([s.per_class_iou for s in per_predictor_scores.values()])
    score = SeaScore(per_class, mean, mious, mean)
    coverage = {p.name: (included[p.name], len(manifest.pairs)) for p in manifest.predictors}
    return SeaRun(method_name, score, per_predictor_scores, coverage, tuple(excluded))


def _mean_per_class(per_class_lists) -> tuple:
    """Classwise mean over predictors, ignoring undefined (NaN) entries."""
    k = len(per_class_lists[0])
    out = []
    for c in range(k):
        defined = [ious[c] for ious in per_class_lists if not math.isnan(ious[c])]
        out.append(sum(defined) / len(defined) if defined else math.nan)
    return tuple(out)


# ---------------------------------------------------------------------------
# Analyses

@dataclass(frozen=True)
class VisIrDiffResult:
    """Per-image mIoU(IR) - mIoU(VIS), ascending, and the share above zero."""

    diffs: tuple  # (pair_id, diff), sorted ascending by diff
    fraction_positive: float
    excluded: tuple = ()


def analyze_vis_ir_diff(manifest: DatasetManifest, vis_method: str = "Visible",
                        ir_method: str = "Infrared",
                        threads: int | None = None) -> VisIrDiffResult:
    """Image-level comparison of the two source baselines, averaged over
    predictors."""
    if not manifest.predictors:
        raise ContractError("manifest declares no predictors; SEA needs at least one")
    k = len(manifest.classes)

    def job(pair):
        try:
            gt = load_mask(pair.gt_mask_path)
            gt.validate_labels(k)
        except ContractError as exc:
            return pair.id, None, str(exc)
        diffs = []
        for predictor in manifest.predictors:
            vis_path = _mask_path(predictor, vis_method, pair.id)
            ir_path = _mask_path(predictor, ir_method, pair.id)
            if not vis_path.is_file() or not ir_path.is_file():
                continue
            try:
                empty = ConfusionMatrix.empty(k)
                miou_vis = compute_score(accumulate(empty, load_mask(vis_path), gt)).miou
                miou_ir = compute_score(accumulate(empty, load_mask(ir_path), gt)).miou
            except ContractError as exc:
                return pair.id, None, str(exc)
            diffs.append(miou_ir - miou_vis)
        if not diffs:
            return pair.id, None, "no predictor has both source masks"
        return pair.id, sum(diffs) / len(diffs), None

    results = _map_pairs(job, manifest.pairs, threads)
    diffs = [(pid, value) for pid, value, err in results if err is None]
    excluded = tuple(f"pair {pid}: {err}" for pid, _, err in results if err is not None)
    if not diffs:
        raise ContractError("vis-ir-diff: no pair could be scored")
    diffs.sort(key=lambda item: (item[1], item[0]))
    fraction = sum(1 for _, d in diffs if d > 0) / len(diffs)
    return VisIrDiffResult(tuple(diffs), fraction, excluded)


@dataclass(frozen=True)
class ClassImprovementResult:
    """Per-class IoU delta of a method against a baseline, sorted descending."""

    method: str
    baseline: str
    deltas: tuple  # (class_name, delta)
    omitted: tuple = ()  # classes undefined everywhere


def analyze_class_improvement(manifest: DatasetManifest, method_name: str,
                              baseline: str = "Visible",
                              threads: int | None = None) -> ClassImprovementResult:
    """Classwise IoU(method) - IoU(baseline) from pooled matrices, averaged
    across predictors; classes undefined in both runs are omitted."""
    run_m = run_sea(manifest, method_name, threads)
    run_b = run_sea(manifest, baseline, threads)
    names = manifest.classes.names
    deltas, omitted = [], []
    for c, class_name in enumerate(names):
        per_predictor = []
        for predictor in manifest.predictors:
            iou_m = run_m.per_predictor_scores[predictor.name].per_class_iou[c]
            iou_b = run_b.per_predictor_scores[predictor.name].per_class_iou[c]
            if math.isnan(iou_m) and math.isnan(iou_b):
                continue
            iou_m = 0.0 if math.isnan(iou_m) else iou_m
            iou_b = 0.0 if math.isnan(iou_b) else iou_b
            per_predictor.append(iou_m - iou_b)
        if per_predictor:
            deltas.append((class_name, sum(per_predictor) / len(per_predictor)))
        else:
            omitted.append(class_name)
    deltas.sort(key=lambda item: (-item[1], item[0]))
    return ClassImprovementResult(method_name, baseline, tuple(deltas), tuple(omitted))


def count_improvements(table: ScoreTable, baseline_row: str = "Visible") -> dict:
    """Per metric, how many non-baseline methods strictly beat the baseline
    (direction-adjusted so QCV counts improvements too)."""
    if baseline_row not in table.methods:
        raise ContractError(f"score table has no baseline row {baseline_row!r}")
    base_index = table.methods.index(baseline_row)
    counted = [i for i, m in enumerate(table.methods)
               if m.strip().lower() not in BASELINE_ROW_NAMES]
    counts = {}
    for metric in METRIC_ORDER:
        if metric not in table.columns:
            continue
        adjusted = metric_direction_adjust(metric, table.columns[metric])
        baseline_value = adjusted[base_index]
        counts[metric] = sum(1 for i in counted if adjusted[i] > baseline_value)
    return counts


# ---------------------------------------------------------------------------
# Report

@dataclass(frozen=True)
class Report:
    """Everything one dataset run produces: the score table, SEA details,
    correlation rows, analyses, and coverage notes."""

    dataset: str
    score_table: ScoreTable
    sea_runs: dict
    correlation: tuple | None = None
    analyses: dict = field(default_factory=dict)
    notes: tuple = ()


def build_report(manifest: DatasetManifest, threads: int | None = None) -> Report:
    """Run the full pipeline over every manifest method."""
    notes = list(manifest.flagged)
    sea_available = bool(manifest.predictors)

    method_runs, sea_runs = {}, {}
    for method in manifest.methods:
        run = run_conventional(manifest, method.name, threads)
        method_runs[method.name] = run
        notes.extend(f"metrics[{method.name}]: {line}" for line in run.excluded)
        if sea_available:
            sea = run_sea(manifest, method.name, threads)
            sea_runs[method.name] = sea
            notes.extend(f"sea[{method.name}]: {line}" for line in sea.excluded)

    methods = tuple(m.name for m in manifest.methods)
    columns = {metric: tuple(method_runs[m].dataset_means[metric] for m in methods)
               for metric in METRIC_ORDER}
    if sea_available:
        for predictor in manifest.predictors:
            columns[f"SEA_{predictor.name}"] = tuple(
                sea_runs[m].score.per_predictor[predictor.name] for m in methods)
        columns[SEA_MEAN_COLUMN] = tuple(sea_runs[m].score.mean for m in methods)
    table = ScoreTable(methods, columns)

    correlation = None
    if sea_available:
        try:
            correlation = tuple(correlation_table([(manifest.name, table)], SEA_MEAN_COLUMN))
        except ContractError as exc:
            notes.append(f"correlation skipped: {exc}")

    analyses = {}
    method_names = set(methods)
    if sea_available and {"Visible", "Infrared"} <= method_names:
        try:
            analyses["vis_ir_diff"] = analyze_vis_ir_diff(manifest, threads=threads)
        except ContractError as exc:
            notes.append(f"vis-ir-diff skipped: {exc}")
    if "Visible" in method_names:
        analyses["improvement_counts"] = count_improvements(table, "Visible")

    return Report(manifest.name, table, sea_runs, correlation, analyses, tuple(notes))


def _coverage_lines(report: Report) -> list:
    lines = []
    for method, sea in report.sea_runs.items():
        for predictor, (got, total) in sea.coverage.items():
            if got != total:
                lines.append(f"coverage sea[{method}][{predictor}]: {got}/{total} pairs")
    return lines


def _json_payload(report: Report) -> dict:
    table = report.score_table
    payload = {
        "dataset": report.dataset,
        "methods": list(table.methods),
        "columns": {name: list(values) for name, values in table.columns.items()},
        "sea": {
            method: {
                "per_predictor": dict(sea.score.per_predictor),
                "mean": sea.score.mean,
                "per_class_iou": [None if math.isnan(v) else v
                                  for v in sea.score.per_class_iou],
                "coverage": {p: [got, total] for p, (got, total) in sea.coverage.items()},
            }
            for method, sea in report.sea_runs.items()
        },
        "correlation": None,
        "analyses": {},
        "notes": list(report.notes) + _coverage_lines(report),
    }
    if report.correlation is not None:
        payload["correlation"] = [
            {"dataset": row.dataset, "taus": dict(row.taus), "best_metric": row.best_metric}
            for row in report.correlation]
    analyses = {}
    if "vis_ir_diff" in report.analyses:
        diff = report.analyses["vis_ir_diff"]
        analyses["vis_ir_diff"] = {
            "diffs": [[pid, value] for pid, value in diff.diffs],
            "fraction_positive": diff.fraction_positive,
            "excluded": list(diff.excluded),
        }
    if "improvement_counts" in report.analyses:
        analyses["improvement_counts"] = dict(report.analyses["improvement_counts"])
    if "class_improvement" in report.analyses:
        ci = report.analyses["class_improvement"]
        analyses["class_improvement"] = {
            "method": ci.method, "baseline": ci.baseline,
            "deltas": [[name, value] for name, value in ci.deltas],
            "omitted": list(ci.omitted),
        }
    payload["analyses"] = analyses
    return payload


def _format_metric(value: float) -> str:
    return f"{value:.3f}"


def _format_percent(value: float) -> str:
    return f"{100.0 * value:.1f}"


def _mark_best(values, lower_better: bool):
    """Per-column marks: best bold, second best italic; on a tie for best
    everything tied is bold and nothing is second."""
    order = sorted(set(values), reverse=not lower_better)
    marks = [""] * len(values)
    if not order:
        return marks
    best = order[0]
    best_count = sum(1 for v in values if v == best)
    second = order[1] if len(order) > 1 and best_count == 1 else None
    for i, v in enumerate(values):
        if v == best:
            marks[i] = "bold"
        elif second is not None and v == second:
            marks[i] = "italic"
    return marks


def _markdown_table(headers, rows) -> list:
    lines = ["| " + " | ".join(headers) + " |",
             "| " + " | ".join("---" for _ in headers) + " |"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


def _render_markdown(report: Report) -> str:
    table = report.score_table
    lines = [f"# Fusion evaluation report: {report.dataset}", ""]

    headers = ["method"] + list(table.columns)
    cells = {name: [] for name in table.columns}
    for name, values in table.columns.items():
        is_percent = name.startswith("SEA_")
        marks = _mark_best(values, lower_better=name in LOWER_BETTER)
        for value, mark in zip(values, marks):
            text = _format_percent(value) if is_percent else _format_metric(value)
            if mark == "bold":
                text = f"**{text}**"
            elif mark == "italic":
                text = f"*{text}*"
            cells[name].append(text)
    rows = [[method] + [cells[name][i] for name in table.columns]
            for i, method in enumerate(table.methods)]
    lines += ["## Scores", ""]
    lines += _markdown_table(headers, rows)
    lines.append("")

    if report.correlation:
        lines += ["## Rank correlation vs SEA", ""]
        metrics = list(report.correlation[0].taus)
        rows = []
        for row in report.correlation:
            taus = [row.taus[m] for m in metrics]
            marks = _mark_best(taus, lower_better=False)
            cells_row = []
            for value, mark in zip(taus, marks):
                text = _format_metric(value)
                cells_row.append(f"**{text}**" if mark == "bold" else text)
            rows.append([row.dataset] + cells_row + [row.best_metric])
        lines += _markdown_table(["dataset"] + metrics + ["best"], rows)
        lines.append("")

    if "vis_ir_diff" in report.analyses:
        diff = report.analyses["vis_ir_diff"]
        lines += ["## Infrared minus visible, per image", ""]
        lines += _markdown_table(
            ["pair", "mIoU diff"],
            [[pid, _format_metric(value)] for pid, value in diff.diffs])
        lines += ["", f"Fraction of images where infrared wins: "
                      f"{_format_metric(diff.fraction_positive)}", ""]

    if "class_improvement" in report.analyses:
        ci = report.analyses["class_improvement"]
        lines += [f"## Per-class IoU delta: {ci.method} vs {ci.baseline}", ""]
        lines += _markdown_table(
            ["class", "delta"],
            [[name, _format_metric(value)] for name, value in ci.deltas])
        if ci.omitted:
            lines += ["", "Omitted (undefined in both runs): " + ", ".join(ci.omitted)]
        lines.append("")

    if "improvement_counts" in report.analyses:
        counts = report.analyses["improvement_counts"]
        lines += ["## Methods improving on Visible, per metric", ""]
        lines += _markdown_table(
            ["metric", "count"],
            [[metric, str(count)] for metric, count in counts.items()])
        lines.append("")

    notes = list(report.notes) + _coverage_lines(report)
    if notes:
        lines += ["## Notes", ""]
        lines += [f"- {note}" for note in notes]
        lines.append("")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, formats, out_dir) -> list:
    """Write the requested formats into out_dir; returns the paths written.

    CSV and JSON carry full-precision floats (lossless round-trip);
    markdown is the display rendering (3-decimal metrics, 1-decimal
    percent mIoU, best bold / second-best italic).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    known = {"csv", "json", "md", "markdown"}
    formats = [f.strip().lower() for f in formats]
    for f in formats:
        if f not in known:
            raise ContractError(f"unknown report format {f!r}; expected csv, json, md")
    written = []
    if "csv" in formats:
        scores_path = out_dir / "scores.csv"
        report.score_table.to_csv(scores_path)
        written.append(scores_path)
        if report.correlation is not None:
            corr_path = out_dir / "correlation.csv"
            metrics = list(report.correlation[0].taus)
            with corr_path.open("w", newline="") as fh:
                fh.write(",".join(["dataset"] + metrics + ["best"]) + "\n")
                for row in report.correlation:
                    cells = [row.dataset] + [repr(row.taus[m]) for m in metrics] + [row.best_metric]
                    fh.write(",".join(cells) + "\n")
            written.append(corr_path)
    if "json" in formats:
        json_path = out_dir / "report.json"
        json_path.write_text(json.dumps(_json_payload(report), indent=2) + "\n")
        written.append(json_path)
    if "md" in formats or "markdown" in formats:
        md_path = out_dir / "report.md"
        md_path.write_text(_render_markdown(report))
        written.append(md_path)
    return written
