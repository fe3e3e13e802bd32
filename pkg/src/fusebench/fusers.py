"""Baseline fusion operators.

These exist so the whole evaluation pipeline runs without any learned
fusion model: the visible-only / infrared-only passthroughs double as
the source baseline rows of the score tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .imaging import ImagePlane, PyramidLevels, laplacian_pyramid, pyramid_collapse

STRATEGIES = ("visible-only", "infrared-only", "average", "max-select",
              "laplacian-pyramid")


@dataclass(frozen=True)
class FuserSpec:
    """Strategy plus its parameters (average weight, pyramid depth)."""

    strategy: str
    weight: float = 0.5
    depth: int = 4

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(
                f"unknown fusion strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not 0.0 <= self.weight <= 1.0:
            raise ContractError(f"average weight must be in [0,1], got {self.weight}")
        if self.depth < 1:
            raise ContractError(f"pyramid depth must be >= 1, got {self.depth}")


def _fuse_laplacian(vis: ImagePlane, ir: ImagePlane, depth: int) -> ImagePlane:
    pyr_v = laplacian_pyramid(vis, depth)
    pyr_i = laplacian_pyramid(ir, depth)
    fused_levels = []
    for lv, li in zip(pyr_v.levels[:-1], pyr_i.levels[:-1]):
        # Max-absolute coefficient per band; ties keep the visible side so
        # identical inputs reconstruct exactly.
        fused_levels.append(np.where(np.abs(lv) >= np.abs(li), lv, li))
    fused_levels.append((pyr_v.levels[-1] + pyr_i.levels[-1]) / 2.0)
    return ImagePlane.from_float(pyramid_collapse(PyramidLevels(tuple(fused_levels))))


def fuse(spec: FuserSpec, vis: ImagePlane, ir: ImagePlane) -> ImagePlane:
    """Apply a fusion strategy to a dimension-matched visible/infrared pair."""
    if vis.shape != ir.shape:
        raise ContractError(
            f"visible {vis.shape} and infrared {ir.shape} dimensions differ")
    if spec.strategy == "visible-only":
        return ImagePlane(vis.pixels.copy())
    if spec.strategy == "infrared-only":
        return ImagePlane(ir.pixels.copy())
    if spec.strategy == "average":
        w = spec.weight
        return ImagePlane.from_float(w * vis.as_float() + (1.0 - w) * ir.as_float())
    if spec.strategy == "max-select":
        return ImagePlane(np.maximum(vis.pixels, ir.pixels))
    return _fuse_laplacian(vis, ir, spec.depth)
