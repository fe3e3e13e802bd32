"""Segmentation backends.

The builtin "luma-bands" backend quantizes luminance into as many equal
bands as there are classes. It needs no weights, runs anywhere, and is
fully deterministic, which makes it the reference backend for pipeline
and contract tests. The open-vocabulary model names ("seem", "xdecoder",
"gsam") are registered as presets so configs can name them, but loading
one requires its runtime and weights, which this package does not bundle.
"""

from __future__ import annotations

import numpy as np

from .config import IGNORE_LABEL
from .errors import AdapterError, ModelUnavailableError

BUILTIN_MODEL = "luma-bands"
PRESET_MODELS = ("seem", "xdecoder", "gsam")


class LumaBands:
    """Label = index of the equal-width luminance band a pixel falls in.

    With a positive margin, pixels closer than `margin` luminance steps
    to an interior band edge are left unassigned (255), mimicking a
    model that abstains on ambiguous pixels.
    """

    def __init__(self, class_count: int, margin: float = 0.0):
        if class_count < 1:
            raise AdapterError("luma-bands needs at least one class")
        if margin < 0.0:
            raise AdapterError(f"margin must be >= 0, got {margin}")
        self.class_count = class_count
        self.margin = float(margin)

    def segment(self, luma: np.ndarray) -> np.ndarray:
        bands = (luma.astype(np.uint16) * self.class_count) // 256
        labels = np.minimum(bands, self.class_count - 1).astype(np.uint8)
        if self.margin > 0.0 and self.class_count > 1:
            edges = np.arange(1, self.class_count) * 256.0 / self.class_count
            distance = np.min(np.abs(luma.astype(np.float64)[..., None] - edges),
                              axis=-1)
            labels = np.where(distance < self.margin, IGNORE_LABEL, labels)
        return labels.astype(np.uint8)


def _preset_loader(name: str):
    def load(class_count: int, device: str, prompts: tuple):
        raise ModelUnavailableError(
            f"model {name!r} needs its segmentation runtime and pre-trained "
            "weights, which are not bundled with this package")
    return load


def _builtin_loader(class_count: int, device: str, prompts: tuple):
    return LumaBands(class_count)


_LOADERS = {BUILTIN_MODEL: _builtin_loader}
_LOADERS.update({name: _preset_loader(name) for name in PRESET_MODELS})


def available_models() -> tuple:
    return tuple(_LOADERS)


def make_backend(model: str, class_count: int, device: str = "cpu",
                 prompts: tuple = ()):
    """Instantiate the named backend; may raise ModelUnavailableError."""
    if model not in _LOADERS:
        raise AdapterError(
            f"unknown model {model!r}; choose from {', '.join(_LOADERS)}")
    return _LOADERS[model](class_count, device, prompts)
