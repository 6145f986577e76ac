"""Scale pyramid - resized slices and rect mapping between scales"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import cv2
import numpy as np

from .geometry import Rect

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaleSpec:
    """Scale s_i: resize factor and the resulting slice dims (w_i, h_i)"""

    scale_id: int
    factor: float
    scaled_dims: Tuple[int, int]


def build_scales(dims: Tuple[int, int], factors: Sequence[float], window_dims: Tuple[int, int]) -> List[ScaleSpec]:
    """Scales whose resized slice still fits one window; ``scale_id`` is the index in ``factors``"""
    scales = []
    for scale_id, factor in enumerate(factors):
        scaled = (int(round(dims[0] * factor)), int(round(dims[1] * factor)))
        if scaled[0] < window_dims[0] or scaled[1] < window_dims[1]:
            logger.debug(f"Skipping scale {factor}: {scaled} smaller than window {window_dims}")
            continue
        scales.append(ScaleSpec(scale_id, float(factor), scaled))
    return scales


def rescale_slice(image: np.ndarray, scale: ScaleSpec) -> np.ndarray:
    """Resize a [x, y] slice to ``scale.scaled_dims`` with bilinear interpolation"""
    w, h = scale.scaled_dims
    # cv2 takes (columns, rows); our rows are x
    resized = cv2.resize(np.ascontiguousarray(image, dtype=np.float32), (h, w), interpolation=cv2.INTER_LINEAR)
    return resized.reshape(w, h)


def rect_to_scale(rect: Rect, scale: ScaleSpec) -> Rect:
    """Map an original-resolution rect onto a scaled slice, covering the same pixels"""
    f = scale.factor
    w, h = scale.scaled_dims
    return Rect(
        min(int(math.floor(rect.x0 * f)), w - 1),
        min(int(math.floor(rect.y0 * f)), h - 1),
        min(int(math.ceil((rect.x1 + 1) * f)) - 1, w - 1),
        min(int(math.ceil((rect.y1 + 1) * f)) - 1, h - 1),
    )


def rect_from_scale(rect: Rect, scale: ScaleSpec, dims: Tuple[int, int]) -> Rect:
    """Map a scaled-slice rect back to original slice pixels"""
    f = scale.factor
    return Rect(
        min(int(math.floor(rect.x0 / f)), dims[0] - 1),
        min(int(math.floor(rect.y0 / f)), dims[1] - 1),
        min(int(math.ceil((rect.x1 + 1) / f)) - 1, dims[0] - 1),
        min(int(math.ceil((rect.y1 + 1) / f)) - 1, dims[1] - 1),
    )
