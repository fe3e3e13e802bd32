"""Batch segmentation adapter.

Runs a segmentation backend over a directory of images and writes
indexed PNG masks (pixel value = class index, 255 = unassigned) that
drop straight into a fusebench predictor mask directory.
"""

from .backends import (BUILTIN_MODEL, PRESET_MODELS, LumaBands,
                       available_models, make_backend)
from .config import IGNORE_LABEL, MAX_CLASSES, AdapterConfig, load_classes
from .errors import AdapterError, ModelUnavailableError
from .runner import IMAGE_SUFFIXES, PredictReport, predict_masks

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "BUILTIN_MODEL",
    "IGNORE_LABEL",
    "IMAGE_SUFFIXES",
    "LumaBands",
    "MAX_CLASSES",
    "ModelUnavailableError",
    "PRESET_MODELS",
    "PredictReport",
    "available_models",
    "load_classes",
    "make_backend",
    "predict_masks",
    "__version__",
]
