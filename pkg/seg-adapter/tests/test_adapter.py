"""Config validation, backends, batch runs, and the CLI."""

import numpy as np
import pytest
from PIL import Image

import seg_adapter as sa
from seg_adapter.cli import main

from smoke import CLASS_NAMES, SMOKE_IDS, write_image


def make_config(input_dir, classes_path, output_dir, **overrides):
    kwargs = dict(model="luma-bands",
                  class_names=sa.load_classes(classes_path),
                  input_dir=input_dir, output_dir=output_dir)
    kwargs.update(overrides)
    return sa.AdapterConfig(**kwargs)


class TestConfig:
    def test_load_classes_skips_blank_lines(self, tmp_path):
        path = tmp_path / "classes.txt"
        path.write_text("car\n\n  person \n\nsky\n")
        assert sa.load_classes(path) == ("car", "person", "sky")

    def test_load_classes_missing_file(self, tmp_path):
        with pytest.raises(sa.AdapterError, match="not found"):
            sa.load_classes(tmp_path / "absent.txt")

    def test_class_count_limits(self, tmp_path):
        too_many = tuple(f"c{i}" for i in range(256))
        with pytest.raises(sa.AdapterError, match="255"):
            sa.AdapterConfig("luma-bands", too_many, tmp_path, tmp_path)
        with pytest.raises(sa.AdapterError, match="empty"):
            sa.AdapterConfig("luma-bands", (), tmp_path, tmp_path)
        with pytest.raises(sa.AdapterError, match="unique"):
            sa.AdapterConfig("luma-bands", ("a", "a"), tmp_path, tmp_path)

    def test_prompt_template_needs_placeholder(self, tmp_path):
        with pytest.raises(sa.AdapterError, match="name"):
            sa.AdapterConfig("luma-bands", ("a",), tmp_path, tmp_path,
                             prompt_template="a photo")

    def test_prompts_render_in_label_order(self, tmp_path):
        config = sa.AdapterConfig("luma-bands", ("car", "sky"), tmp_path,
                                  tmp_path, prompt_template="a photo of {name}")
        assert config.prompts() == ("a photo of car", "a photo of sky")


class TestBackends:
    def test_registry_lists_builtin_and_presets(self):
        models = sa.available_models()
        assert sa.BUILTIN_MODEL in models
        assert set(sa.PRESET_MODELS) <= set(models)

    def test_unknown_model_rejected(self):
        with pytest.raises(sa.AdapterError, match="luma-bands"):
            sa.make_backend("nope", 2)

    @pytest.mark.parametrize("name", sa.PRESET_MODELS)
    def test_presets_require_weights(self, name):
        with pytest.raises(sa.ModelUnavailableError, match=name):
            sa.make_backend(name, 2)

    def test_luma_bands_two_class_split(self):
        luma = np.array([[0, 127], [128, 255]], dtype=np.uint8)
        labels = sa.LumaBands(2).segment(luma)
        assert labels.tolist() == [[0, 0], [1, 1]]
        assert labels.dtype == np.uint8

    def test_luma_bands_three_class_edges(self):
        # band edges at 256/3 = 85.33 and 512/3 = 170.67
        luma = np.array([[0, 85, 86, 170, 171, 255]], dtype=np.uint8)
        labels = sa.LumaBands(3).segment(luma)
        assert labels.tolist() == [[0, 0, 1, 1, 2, 2]]

    def test_luma_bands_margin_abstains_near_edges(self):
        luma = np.array([[120, 124, 128, 132, 136]], dtype=np.uint8)
        labels = sa.LumaBands(2, margin=8.0).segment(luma)
        assert labels.tolist() == [[0, 255, 255, 255, 1]]

    def test_luma_bands_rejects_bad_params(self):
        with pytest.raises(sa.AdapterError):
            sa.LumaBands(0)
        with pytest.raises(sa.AdapterError):
            sa.LumaBands(2, margin=-1.0)


class TestPredictMasks:
    def test_smoke_set_complete(self, smoke_set, tmp_path):
        input_dir, classes = smoke_set
        out = tmp_path / "masks"
        report = sa.predict_masks(make_config(input_dir, classes, out))
        assert report.written == SMOKE_IDS
        assert report.skipped == ()
        for pair_id in SMOKE_IDS:
            with Image.open(out / f"{pair_id}.png") as img:
                assert img.mode == "L"
                labels = np.asarray(img)
            assert labels.shape == (24, 32)
            assert set(np.unique(labels)) <= {0, 1, 255}

    def test_rerun_byte_identical(self, smoke_set, tmp_path):
        input_dir, classes = smoke_set
        out = tmp_path / "masks"
        config = make_config(input_dir, classes, out)
        sa.predict_masks(config)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        sa.predict_masks(config)
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second

    def test_empty_input_dir_clean(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        classes = tmp_path / "classes.txt"
        classes.write_text("a\nb\n")
        report = sa.predict_masks(make_config(empty, classes, tmp_path / "out"))
        assert report.written == () and report.skipped == ()

    def test_missing_input_dir_rejected(self, tmp_path):
        classes = tmp_path / "classes.txt"
        classes.write_text("a\n")
        with pytest.raises(sa.AdapterError, match="input directory"):
            sa.predict_masks(make_config(tmp_path / "absent", classes,
                                         tmp_path / "out"))

    def test_corrupt_image_skipped_others_written(self, smoke_set, tmp_path):
        input_dir, classes = smoke_set
        (input_dir / "broken.png").write_bytes(b"not a png")
        out = tmp_path / "masks"
        report = sa.predict_masks(make_config(input_dir, classes, out))
        assert report.written == SMOKE_IDS
        assert len(report.skipped) == 1 and report.skipped[0][0] == "broken"
        assert not (out / "broken.png").exists()

    def test_duplicate_stems_rejected(self, smoke_set, tmp_path):
        input_dir, classes = smoke_set
        write_image(input_dir / "frame_a.jpg", np.zeros((8, 8), dtype=np.uint8))
        with pytest.raises(sa.AdapterError, match="frame_a"):
            sa.predict_masks(make_config(input_dir, classes, tmp_path / "out"))

    def test_bad_backend_output_is_per_image_skip(self, smoke_set, tmp_path,
                                                  monkeypatch):
        input_dir, classes = smoke_set

        class WrongShape:
            def segment(self, luma):
                return np.zeros((2, 2), dtype=np.uint8)

        monkeypatch.setitem(sa.backends._LOADERS, "wrong-shape",
                            lambda count, device, prompts: WrongShape())
        report = sa.predict_masks(make_config(input_dir, classes,
                                              tmp_path / "out",
                                              model="wrong-shape"))
        assert report.written == ()
        assert len(report.skipped) == len(SMOKE_IDS)


class TestCli:
    def test_smoke_run(self, smoke_set, tmp_path, capsys):
        input_dir, classes = smoke_set
        out = tmp_path / "masks"
        code = main(["--model", "luma-bands", "--classes", str(classes),
                     "--in", str(input_dir), "--out", str(out)])
        assert code == 0
        assert "wrote 3 masks" in capsys.readouterr().out
        assert sorted(p.stem for p in out.iterdir()) == sorted(SMOKE_IDS)

    def test_empty_dir_exits_clean(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        classes = tmp_path / "classes.txt"
        classes.write_text("a\n")
        code = main(["--model", "luma-bands", "--classes", str(classes),
                     "--in", str(empty), "--out", str(tmp_path / "out")])
        assert code == 0
        assert "wrote 0 masks" in capsys.readouterr().out

    def test_unknown_model_exits_one(self, smoke_set, tmp_path, capsys):
        input_dir, classes = smoke_set
        code = main(["--model", "nope", "--classes", str(classes),
                     "--in", str(input_dir), "--out", str(tmp_path / "out")])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_preset_without_weights_exits_one(self, smoke_set, tmp_path, capsys):
        input_dir, classes = smoke_set
        code = main(["--model", "seem", "--classes", str(classes),
                     "--in", str(input_dir), "--out", str(tmp_path / "out")])
        assert code == 1
        assert "weights" in capsys.readouterr().err

    def test_corrupt_image_exits_two(self, smoke_set, tmp_path, capsys):
        input_dir, classes = smoke_set
        (input_dir / "broken.png").write_bytes(b"junk")
        code = main(["--model", "luma-bands", "--classes", str(classes),
                     "--in", str(input_dir), "--out", str(tmp_path / "out")])
        assert code == 2
        assert "skipped broken" in capsys.readouterr().err

    def test_bad_prompt_template_exits_one(self, smoke_set, tmp_path, capsys):
        input_dir, classes = smoke_set
        code = main(["--model", "luma-bands", "--classes", str(classes),
                     "--in", str(input_dir), "--out", str(tmp_path / "out"),
                     "--prompt-template", "no placeholder"])
        assert code == 1
