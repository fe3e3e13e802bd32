"""Raster types, PNG I/O, color conversion, and shared numerical kernels.

All pixel math runs in 64-bit float over the native [0, 255] intensity range.
Filter convolutions (Sobel, Gaussian, pyramid taps) use edge-replicate
padding so derived maps stay defined at the borders; sliding-window
statistics elsewhere in the toolkit use valid placement instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ContractError

IGNORE_LABEL = 255

# BT.601 luma weights; the de-facto convention of fusion metric toolboxes.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                     [-2.0, 0.0, 2.0],
                     [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T

# 5-tap binomial kernel for pyramid reduce/expand.
_PYRAMID_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _require_uint8_2d(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.size == 0:
        raise ContractError(f"{what} must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ContractError(f"{what} must be uint8, got {arr.dtype}")
    return arr


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """Single-channel 8-bit raster, the substrate of every metric."""

    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        object.__setattr__(self, "pixels", _require_uint8_2d(self.pixels, "ImagePlane.pixels"))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        """Float64 view in [0, 255] (fresh array, safe to mutate)."""
        return self.pixels.astype(np.float64)

    @classmethod
    def from_float(cls, values: np.ndarray) -> "ImagePlane":
        """Quantize a float plane: round half away from zero, clamp to [0, 255]."""
        values = np.asarray(values, dtype=np.float64)
        quantized = np.clip(np.floor(values + 0.5), 0.0, 255.0)
        return cls(quantized.astype(np.uint8))


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Interleaved 8-bit RGB raster."""

    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
            raise ContractError(f"RgbImage.pixels must be (h, w, 3), got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ContractError(f"RgbImage.pixels must be uint8, got {arr.dtype}")
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class SegMask:
    """Class-label raster: values index a ClassSet, 255 means ignore/unlabeled."""

    labels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        object.__setattr__(self, "labels", _require_uint8_2d(self.labels, "SegMask.labels"))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def validate_labels(self, class_count: int) -> None:
        """Every label must be < class_count or the ignore value 255."""
        bad = (self.labels >= class_count) & (self.labels != IGNORE_LABEL)
        if bad.any():
            index = int(np.argmax(bad.ravel()))
            value = int(self.labels.ravel()[index])
            raise ContractError(
                f"label {value} at pixel index {index} outside class range "
                f"0..{class_count - 1} (255 = ignore)")


@dataclass(frozen=True, eq=False)
class PyramidLevels:
    """Ordered float planes; each level is ceil(previous/2) per dimension."""

    levels: tuple

    def __post_init__(self):
        if not self.levels:
            raise ContractError("PyramidLevels needs at least one level")
        levels = tuple(np.asarray(level, dtype=np.float64) for level in self.levels)
        for prev, cur in zip(levels, levels[1:]):
            expect = (math.ceil(prev.shape[0] / 2), math.ceil(prev.shape[1] / 2))
            if cur.shape != expect:
                raise ContractError(
                    f"pyramid level shape {cur.shape} does not halve {prev.shape}")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)


# ---------------------------------------------------------------------------
# PNG I/O

def load_png(path) -> RgbImage | SegMask:
    """Load an 8-bit PNG: RGB/RGBA as RgbImage (alpha dropped), single-channel
    (gray or indexed) as SegMask with the raw sample/index values.

    16-bit or exotic color types raise a ContractError.
    """
    path = Path(path)
    if not path.is_file():
        raise ContractError(f"no such image file: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("RGB", "RGBA"):
                arr = np.asarray(img)[:, :, :3]
                return RgbImage(np.ascontiguousarray(arr, dtype=np.uint8))
            if mode in ("L", "P"):
                return SegMask(np.asarray(img, dtype=np.uint8))
            if mode == "LA":
                return SegMask(np.asarray(img)[:, :, 0].astype(np.uint8))
            raise ContractError(
                f"unsupported bit depth or color type (mode {mode!r}) in {path}; "
                "need 8-bit RGB/RGBA or single-channel")
    except UnidentifiedImageError as exc:
        raise ContractError(f"not a decodable image: {path}") from exc


def load_intensity(path) -> ImagePlane:
    """Load a PNG as a single intensity plane (RGB converted via luma)."""
    loaded = load_png(path)
    if isinstance(loaded, RgbImage):
        return to_grayscale(loaded)
    return ImagePlane(loaded.labels)


def load_mask(path) -> SegMask:
    """Load a PNG that must be a single-channel label mask."""
    loaded = load_png(path)
    if not isinstance(loaded, SegMask):
        raise ContractError(f"mask file must be single-channel 8-bit: {path}")
    return loaded


def save_png(image, path) -> None:
    """Write an ImagePlane/SegMask (grayscale) or RgbImage to disk."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(image, RgbImage):
        Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
    elif isinstance(image, ImagePlane):
        Image.fromarray(image.pixels, mode="L").save(path, format="PNG")
    elif isinstance(image, SegMask):
        Image.fromarray(image.labels, mode="L").save(path, format="PNG")
    else:
        raise ContractError(f"cannot save object of type {type(image).__name__} as PNG")


def to_grayscale(img: RgbImage) -> ImagePlane:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    rgb = img.pixels.astype(np.float64)
    wr, wg, wb = _LUMA_WEIGHTS
    luma = wr * rgb[:, :, 0] + wg * rgb[:, :, 1] + wb * rgb[:, :, 2]
    return ImagePlane.from_float(luma)


# ---------------------------------------------------------------------------
# Gradients

def sobel_responses(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw 3x3 Sobel responses (gx, gy) of a float plane, replicate edges."""
    values = np.asarray(values, dtype=np.float64)
    gx = ndimage.correlate(values, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(values, _SOBEL_Y, mode="nearest")
    return gx, gy


def gradient_maps(plane: ImagePlane):
    """Sobel gradients of a plane: (gx, gy, magnitude, orientation).

    Orientation is atan2(gy, gx) in (-pi, pi]. Requires at least 3x3.
    """
    if min(plane.shape) < 3:
        raise ContractError(f"gradient_maps needs at least 3x3, got {plane.shape}")
    gx, gy = sobel_responses(plane.as_float())
    magnitude = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)
    return gx, gy, magnitude, orientation


# ---------------------------------------------------------------------------
# Laplacian pyramid

def _tap_filter(values: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur with replicate edges."""
    out = ndimage.correlate1d(values, _PYRAMID_TAPS, axis=0, mode="nearest")
    return ndimage.correlate1d(out, _PYRAMID_TAPS, axis=1, mode="nearest")


def _reduce(values: np.ndarray) -> np.ndarray:
    return _tap_filter(values)[::2, ::2]


def _expand(values: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Upsample to out_shape via zero interleave + normalized convolution.

    Dividing by the filtered sample mask keeps constants exactly constant
    at every size parity, which makes collapse the exact inverse of the
    decomposition.
    """
    upsampled = np.zeros(out_shape, dtype=np.float64)
    upsampled[::2, ::2] = values
    mask = np.zeros(out_shape, dtype=np.float64)
    mask[::2, ::2] = 1.0
    return _tap_filter(upsampled) / _tap_filter(mask)


def laplacian_pyramid(plane: ImagePlane, depth: int) -> PyramidLevels:
    """Band-pass pyramid: depth-1 Laplacian bands plus the Gaussian top level.

    Requires depth >= 1 and min(width, height) / 2^(depth-1) >= 2.
    """
    if depth < 1:
        raise ContractError(f"pyramid depth must be >= 1, got {depth}")
    if min(plane.shape) / 2 ** (depth - 1) < 2:
        raise ContractError(
            f"depth {depth} too deep for plane of shape {plane.shape}")
    gaussians = [plane.as_float()]
    for _ in range(depth - 1):
        gaussians.append(_reduce(gaussians[-1]))
    bands = [g - _expand(nxt, g.shape) for g, nxt in zip(gaussians, gaussians[1:])]
    return PyramidLevels(tuple(bands) + (gaussians[-1],))


def pyramid_collapse(pyramid: PyramidLevels) -> np.ndarray:
    """Invert laplacian_pyramid: float reconstruction of the source plane."""
    levels = pyramid.levels
    out = levels[-1]
    for band in reversed(levels[:-1]):
        out = band + _expand(out, band.shape)
    return out
