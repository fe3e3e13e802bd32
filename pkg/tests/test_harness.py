"""Manifest loading, pipeline runs, analyses, and report emission."""

import json

import numpy as np
import pytest

import fusebench as fb
from fusebench import ContractError, ImagePlane, ScoreTable, SegMask, save_png

from synth import (CLASS_NAMES, DEFAULT_METHOD_NAMES, PREDICTOR_NAMES,
                      build_synthetic_dataset)


def make_table(methods, **columns):
    return ScoreTable(tuple(methods), {k: tuple(v) for k, v in columns.items()})


class TestLoadManifest:
    def test_defaults_applied(self, tmp_path):
        vis = ImagePlane(np.zeros((20, 20), dtype=np.uint8))
        save_png(vis, tmp_path / "v.png")
        save_png(vis, tmp_path / "i.png")
        save_png(SegMask(np.zeros((20, 20), dtype=np.uint8)), tmp_path / "g.png")
        path = tmp_path / "ds.json"
        path.write_text(json.dumps({
            "classes": ["only"],
            "pairs": [{"id": "p1", "visible_path": "v.png",
                       "infrared_path": "i.png", "gt_mask_path": "g.png"}],
            "predictors": [{"name": "p", "masks_dir": "masks"}],
        }))
        manifest = fb.load_manifest(path)
        assert manifest.name == "ds"
        assert tuple(m.name for m in manifest.methods) == DEFAULT_METHOD_NAMES
        assert manifest.flagged == ()

    def test_classes_from_file(self, tmp_path):
        manifest_path = build_synthetic_dataset(tmp_path / "ds", pair_count=1,
                                                classes_as_file=True)
        manifest = fb.load_manifest(manifest_path)
        assert manifest.classes.names == CLASS_NAMES

    def test_duplicate_pair_id_rejected(self, tmp_path):
        path = tmp_path / "dup.json"
        pair = {"id": "x", "visible_path": "v.png", "infrared_path": "i.png",
                "gt_mask_path": "g.png"}
        path.write_text(json.dumps({"classes": ["c"], "pairs": [pair, pair]}))
        with pytest.raises(ContractError, match="duplicate"):
            fb.load_manifest(path)

    def test_missing_field_names_context(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"classes": ["c"],
                                    "pairs": [{"id": "x", "visible_path": "v"}]}))
        with pytest.raises(ContractError, match=r"pairs\[0\]"):
            fb.load_manifest(path)

    def test_parse_error_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"classes": [,]}')
        with pytest.raises(ContractError, match="broken.json:1"):
            fb.load_manifest(path)

    def test_empty_pairs_rejected(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"classes": ["c"], "pairs": []}))
        with pytest.raises(ContractError, match="pairs"):
            fb.load_manifest(path)

    def test_missing_referenced_file_flagged(self, tmp_path):
        path = tmp_path / "ds.json"
        path.write_text(json.dumps({
            "classes": ["c"],
            "pairs": [{"id": "p1", "visible_path": "nope.png",
                       "infrared_path": "nope.png", "gt_mask_path": "nope.png"}],
        }))
        manifest = fb.load_manifest(path)
        assert len(manifest.flagged) == 3

    def test_method_needs_exactly_one_source(self, tmp_path):
        path = tmp_path / "ds.json"
        path.write_text(json.dumps({
            "classes": ["c"],
            "pairs": [{"id": "p1", "visible_path": "v.png",
                       "infrared_path": "i.png", "gt_mask_path": "g.png"}],
            "methods": [{"name": "both", "fused_dir": "d",
                         "fuser": {"strategy": "average"}}],
        }))
        with pytest.raises(ContractError, match="exactly one"):
            fb.load_manifest(path)


class TestWorkerCount:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("FUSEBENCH_THREADS", "3")
        assert fb.worker_count() == 3

    def test_env_invalid_rejected(self, monkeypatch):
        monkeypatch.setenv("FUSEBENCH_THREADS", "zero")
        with pytest.raises(ContractError):
            fb.worker_count()
        monkeypatch.setenv("FUSEBENCH_THREADS", "0")
        with pytest.raises(ContractError):
            fb.worker_count()

    def test_default_positive(self, monkeypatch):
        monkeypatch.delenv("FUSEBENCH_THREADS", raising=False)
        assert fb.worker_count() >= 1


class TestRunConventional:
    def test_means_are_per_image_averages(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        run = fb.run_conventional(manifest, "Average", threads=1)
        assert run.excluded == ()
        assert set(run.per_image) == {p.id for p in manifest.pairs}
        for metric in fb.METRIC_ORDER:
            values = [run.per_image[p.id][metric] for p in manifest.pairs]
            assert run.dataset_means[metric] == sum(values) / len(values)

    def test_fused_dir_matches_fuser(self, synthetic_dataset, tmp_path):
        manifest = fb.load_manifest(synthetic_dataset)
        written, excluded = fb.fuse_to_dir(manifest, "MaxSelect", tmp_path / "fused",
                                           threads=1)
        assert excluded == [] and len(written) == len(manifest.pairs)
        data = json.loads(open(synthetic_dataset).read())
        data["methods"] = [{"name": "FromDir", "fused_dir": str(tmp_path / "fused")}]
        alt = synthetic_dataset.parent / "alt_fromdir.json"
        alt.write_text(json.dumps(data))
        from_dir = fb.run_conventional(fb.load_manifest(alt), "FromDir", threads=1)
        from_fuser = fb.run_conventional(manifest, "MaxSelect", threads=1)
        assert from_dir.dataset_means == from_fuser.dataset_means

    def test_missing_fused_image_excluded(self, synthetic_dataset, tmp_path):
        manifest = fb.load_manifest(synthetic_dataset)
        fb.fuse_to_dir(manifest, "Average", tmp_path / "fused", threads=1)
        (tmp_path / "fused" / "0002.png").unlink()
        data = json.loads(open(synthetic_dataset).read())
        data["methods"] = [{"name": "Partial", "fused_dir": str(tmp_path / "fused")}]
        alt = synthetic_dataset.parent / "alt_partial.json"
        alt.write_text(json.dumps(data))
        run = fb.run_conventional(fb.load_manifest(alt), "Partial", threads=1)
        assert len(run.excluded) == 1 and "0002" in run.excluded[0]
        assert "0002" not in run.per_image
        assert len(run.per_image) == len(manifest.pairs) - 1

    def test_unknown_method_rejected(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        with pytest.raises(ContractError, match="Nope"):
            fb.run_conventional(manifest, "Nope")

    def test_thread_counts_agree(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        one = fb.run_conventional(manifest, "LaplacianPyramid", threads=1)
        four = fb.run_conventional(manifest, "LaplacianPyramid", threads=4)
        assert one.dataset_means == four.dataset_means
        assert one.per_image == four.per_image


class TestRunSea:
    def test_pooled_matches_manual_accumulation(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        run = fb.run_sea(manifest, "Average", threads=1)
        assert run.excluded == ()
        k = len(manifest.classes)
        for predictor in manifest.predictors:
            cm = fb.ConfusionMatrix.empty(k)
            for pair in manifest.pairs:
                gt = fb.load_mask(pair.gt_mask_path)
                mask = fb.load_mask(predictor.masks_dir / "Average" / f"{pair.id}.png")
                cm = fb.accumulate(cm, mask, gt)
            expected = fb.compute_score(cm)
            assert run.per_predictor_scores[predictor.name].miou == expected.miou
        mious = {p: s.miou for p, s in run.per_predictor_scores.items()}
        assert run.score.mean == fb.aggregate_predictors(mious)
        assert run.coverage == {p: (len(manifest.pairs), len(manifest.pairs))
                                for p in PREDICTOR_NAMES}

    def test_missing_mask_reduces_coverage(self, tmp_path):
        manifest_path = build_synthetic_dataset(tmp_path / "ds", pair_count=3)
        manifest = fb.load_manifest(manifest_path)
        victim = manifest.predictors[0].masks_dir / "Visible" / "0001.png"
        victim.unlink()
        run = fb.run_sea(manifest, "Visible", threads=1)
        assert run.coverage[PREDICTOR_NAMES[0]] == (2, 3)
        assert run.coverage[PREDICTOR_NAMES[1]] == (3, 3)
        assert any("0001" in line for line in run.excluded)

    def test_needs_predictors(self, tmp_path):
        manifest_path = build_synthetic_dataset(tmp_path / "ds", pair_count=1)
        data = json.loads(open(manifest_path).read())
        data["predictors"] = []
        (tmp_path / "ds" / "nopred.json").write_text(json.dumps(data))
        manifest = fb.load_manifest(tmp_path / "ds" / "nopred.json")
        with pytest.raises(ContractError, match="predictor"):
            fb.run_sea(manifest, "Average")


class TestVisIrDiff:
    def test_constructed_fraction_half(self, tmp_path):
        """Four images; infrared masks win on exactly two."""
        root = tmp_path / "ds"
        (root / "masks" / "only" / "Visible").mkdir(parents=True)
        (root / "masks" / "only" / "Infrared").mkdir(parents=True)
        gt_px = np.array([[0, 0], [1, 1]], dtype=np.uint8)
        right = SegMask(gt_px)
        wrong = SegMask(np.array([[0, 1], [1, 1]], dtype=np.uint8))
        plane = ImagePlane(np.zeros((2, 2), dtype=np.uint8))
        pairs = []
        for i in range(4):
            pid = f"p{i}"
            save_png(plane, root / f"{pid}_v.png")
            save_png(plane, root / f"{pid}_i.png")
            save_png(SegMask(gt_px), root / f"{pid}_g.png")
            ir_mask, vis_mask = (right, wrong) if i < 2 else (wrong, right)
            save_png(vis_mask, root / "masks" / "only" / "Visible" / f"{pid}.png")
            save_png(ir_mask, root / "masks" / "only" / "Infrared" / f"{pid}.png")
            pairs.append({"id": pid, "visible_path": f"{pid}_v.png",
                          "infrared_path": f"{pid}_i.png",
                          "gt_mask_path": f"{pid}_g.png"})
        manifest_path = root / "m.json"
        manifest_path.write_text(json.dumps({
            "classes": ["a", "b"], "pairs": pairs,
            "predictors": [{"name": "only", "masks_dir": "masks/only"}]}))
        result = fb.analyze_vis_ir_diff(fb.load_manifest(manifest_path), threads=1)
        assert result.fraction_positive == 0.5
        diffs = dict(result.diffs)
        assert sum(1 for v in diffs.values() if v > 0) == 2
        ordered = [v for _, v in result.diffs]
        assert ordered == sorted(ordered)

    def test_identical_masks_fraction_zero(self, synthetic_dataset, tmp_path):
        manifest = fb.load_manifest(synthetic_dataset)
        data = json.loads(open(synthetic_dataset).read())
        root = tmp_path / "same"
        for predictor in PREDICTOR_NAMES:
            for pair in manifest.pairs:
                src = (manifest.root / "masks" / predictor / "Visible"
                       / f"{pair.id}.png")
                for method in ("Visible", "Infrared"):
                    dst = root / predictor / method / f"{pair.id}.png"
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    dst.write_bytes(src.read_bytes())
        data["predictors"] = [{"name": p, "masks_dir": str(root / p)}
                              for p in PREDICTOR_NAMES]
        alt = manifest.root / "same.json"
        alt.write_text(json.dumps(data))
        result = fb.analyze_vis_ir_diff(fb.load_manifest(alt), threads=1)
        assert result.fraction_positive == 0.0
        assert all(v == 0.0 for _, v in result.diffs)


class TestClassImprovement:
    def test_deltas_sorted_descending(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        result = fb.analyze_class_improvement(manifest, "Average", "Visible",
                                              threads=1)
        values = [v for _, v in result.deltas]
        assert values == sorted(values, reverse=True)
        assert {name for name, _ in result.deltas} | set(result.omitted) \
            == set(CLASS_NAMES)

    def test_matches_pooled_scores(self, synthetic_dataset):
        manifest = fb.load_manifest(synthetic_dataset)
        result = fb.analyze_class_improvement(manifest, "MaxSelect", "Visible",
                                              threads=1)
        run_m = fb.run_sea(manifest, "MaxSelect", threads=1)
        run_b = fb.run_sea(manifest, "Visible", threads=1)
        deltas = dict(result.deltas)
        for c, name in enumerate(CLASS_NAMES):
            if name not in deltas:
                continue
            per_pred = []
            for p in PREDICTOR_NAMES:
                iou_m = run_m.per_predictor_scores[p].per_class_iou[c]
                iou_b = run_b.per_predictor_scores[p].per_class_iou[c]
                per_pred.append((0.0 if np.isnan(iou_m) else iou_m)
                                - (0.0 if np.isnan(iou_b) else iou_b))
            assert deltas[name] == sum(per_pred) / len(per_pred)


class TestCountImprovements:
    def test_hand_counts(self):
        table = make_table(
            ["Visible", "Infrared", "m1", "m2", "m3"],
            EN=[5.0, 4.0, 6.0, 7.0, 3.0],     # m1, m2 beat baseline -> 2
            QCV=[100.0, 90.0, 50.0, 120.0, 99.0],  # lower better: m1, m3 -> 2
            SSIM=[1.0, 1.2, 1.0, 0.9, 0.8])   # ties don't count -> 0
        counts = fb.count_improvements(table, "Visible")
        assert counts == {"EN": 2, "QCV": 2, "SSIM": 0}

    def test_baseline_rows_not_counted(self):
        table = make_table(
            ["Visible", "Infrared", "m1"],
            EN=[1.0, 9.0, 2.0])  # Infrared beats baseline but is excluded
        assert fb.count_improvements(table, "Visible") == {"EN": 1}

    def test_missing_baseline_rejected(self):
        table = make_table(["m1", "m2"], EN=[1.0, 2.0])
        with pytest.raises(ContractError, match="Visible"):
            fb.count_improvements(table, "Visible")


@pytest.fixture(scope="module")
def report(synthetic_dataset):
    manifest = fb.load_manifest(synthetic_dataset)
    return fb.build_report(manifest, threads=2)


class TestReport:
    def test_score_table_shape(self, report):
        table = report.score_table
        assert table.methods == DEFAULT_METHOD_NAMES
        expected = list(fb.METRIC_ORDER) \
            + [f"SEA_{p}" for p in PREDICTOR_NAMES] + ["SEA_mean"]
        assert list(table.columns) == expected

    def test_analyses_present(self, report):
        assert "vis_ir_diff" in report.analyses
        assert "improvement_counts" in report.analyses
        assert report.correlation is not None
        assert report.correlation[-1].dataset == "Mean"

    def test_emit_csv_round_trips(self, report, tmp_path):
        written = fb.emit_report(report, ["csv"], tmp_path)
        names = {p.name for p in written}
        assert "scores.csv" in names and "correlation.csv" in names
        again = ScoreTable.from_csv(tmp_path / "scores.csv")
        assert again.methods == report.score_table.methods
        assert again.columns == report.score_table.columns

    def test_emit_json_matches_table(self, report, tmp_path):
        fb.emit_report(report, ["json"], tmp_path)
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["dataset"] == "synth6"
        for name, values in report.score_table.columns.items():
            assert tuple(payload["columns"][name]) == values  # exact floats
        assert set(payload["sea"]) == set(DEFAULT_METHOD_NAMES)

    def test_emit_markdown_formats(self, report, tmp_path):
        fb.emit_report(report, ["md"], tmp_path)
        text = (tmp_path / "report.md").read_text()
        assert "| method |" in text
        assert "**" in text  # best-marking present
        sea_mean = report.score_table.columns["SEA_mean"]
        best = max(sea_mean)
        assert f"**{100.0 * best:.1f}**" in text

    def test_unknown_format_rejected(self, report, tmp_path):
        with pytest.raises(ContractError, match="pdf"):
            fb.emit_report(report, ["pdf"], tmp_path)


class TestMarkdownMarking:
    def test_tie_both_bold_no_second(self):
        from fusebench.harness import _mark_best
        marks = _mark_best((3.0, 3.0, 1.0), lower_better=False)
        assert marks == ["bold", "bold", ""]

    def test_unique_best_and_second(self):
        from fusebench.harness import _mark_best
        marks = _mark_best((3.0, 2.0, 1.0), lower_better=False)
        assert marks == ["bold", "italic", ""]

    def test_lower_better_inverts(self):
        from fusebench.harness import _mark_best
        marks = _mark_best((3.0, 2.0, 1.0), lower_better=True)
        assert marks == ["", "italic", "bold"]
