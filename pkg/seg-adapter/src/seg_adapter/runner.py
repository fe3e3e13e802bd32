"""Batch prediction: images in, indexed PNG masks out.

Masks are written as 8-bit single-channel PNGs named `<pair_id>.png`,
where the pair id is the input file's stem. Pixel value = class index,
255 = unassigned. Images are processed independently in sorted order;
a file that fails to decode or segment is skipped and reported, never
aborting the batch. Reruns over unchanged inputs rewrite identical
bytes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backends import make_backend
from .config import AdapterConfig, IGNORE_LABEL
from .errors import AdapterError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictReport:
    """Outcome of one batch: written pair ids and (pair id, reason) skips."""

    written: tuple
    skipped: tuple


def _input_images(input_dir: Path) -> list:
    if not input_dir.is_dir():
        raise AdapterError(f"input directory not found: {input_dir}")
    paths = sorted(p for p in input_dir.iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    stems = [p.stem for p in paths]
    for stem in sorted(set(stems)):
        if stems.count(stem) > 1:
            raise AdapterError(
                f"ambiguous pair id {stem!r}: multiple input images share it")
    return paths


def _load_luma(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def _check_labels(labels: np.ndarray, shape: tuple, class_count: int) -> None:
    if labels.shape != shape:
        raise AdapterError(
            f"backend returned shape {labels.shape}, expected {shape}")
    if labels.dtype != np.uint8:
        raise AdapterError(f"backend returned dtype {labels.dtype}, expected uint8")
    bad = (labels >= class_count) & (labels != IGNORE_LABEL)
    if bad.any():
        raise AdapterError(
            f"backend emitted label {int(labels[bad][0])} outside the "
            f"{class_count}-class vocabulary")


def predict_masks(config: AdapterConfig) -> PredictReport:
    """Segment every image in the input dir and write one mask apiece."""
    backend = make_backend(config.model, len(config.class_names),
                           config.device, config.prompts())
    paths = _input_images(config.input_dir)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    written, skipped = [], []
    for path in paths:
        try:
            luma = _load_luma(path)
            labels = backend.segment(luma)
            _check_labels(labels, luma.shape, len(config.class_names))
            Image.fromarray(labels).save(config.output_dir / f"{path.stem}.png")
            written.append(path.stem)
        except (OSError, AdapterError) as exc:
            log.warning("skipping %s: %s", path.stem, exc)
            skipped.append((path.stem, str(exc)))
    return PredictReport(tuple(written), tuple(skipped))
